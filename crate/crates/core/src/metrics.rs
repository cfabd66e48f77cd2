//! Error metrics, 2-D projections and convergence orders.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::particles::Ensemble;
use crate::vug::{CellIndex, SparseGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionBounds {
    pub l1: f64,
    pub r1: f64,
    pub l2: f64,
    pub r2: f64,
}

impl ProjectionBounds {
    pub fn square(lo: f64, hi: f64) -> Self {
        Self { l1: lo, r1: hi, l2: lo, r2: hi }
    }
}

impl ProjectionBounds {
    /// Smallest lattice-aligned box (edges on multiples of `h`) containing `self`.
    pub fn fitted(self, h: f64) -> Self {
        let down = |v: f64| ((v / h) + 1e-9).floor() * h;
        let up = |v: f64| ((v / h) - 1e-9).ceil() * h;
        Self { l1: down(self.l1), r1: up(self.r1), l2: down(self.l2), r2: up(self.r2) }
    }
}

impl Default for ProjectionBounds {
    fn default() -> Self {
        Self::square(-6.0, 8.0)
    }
}

/// Binned estimate of `M(x1, x2)` on `Q^μ × Q^ν`, row-major in `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionGrid {
    pub bounds: ProjectionBounds,
    pub h: f64,
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<f64>,
    /// Particles whose first two coordinates fell outside the bounds.
    pub dropped: usize,
}

fn cells_along(lo: f64, hi: f64, h: f64) -> Result<usize> {
    let n = (hi - lo) / h;
    let rounded = n.round();
    if !(rounded >= 1.0) || (n - rounded).abs() > 1e-9 * rounded.max(1.0) {
        return Err(Error::config(format!("[{lo}, {hi}] is not a positive multiple of h = {h}")));
    }
    Ok(rounded as usize)
}

impl ProjectionGrid {
    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.values[mu * self.n2 + nu]
    }

    pub fn center(&self, mu: usize, nu: usize) -> (f64, f64) {
        (self.bounds.l1 + (mu as f64 + 0.5) * self.h, self.bounds.l2 + (nu as f64 + 0.5) * self.h)
    }

    /// Evaluate `f` at every cell center, in the same layout.
    pub fn tabulate<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.values.len());
        for mu in 0..self.n1 {
            for nu in 0..self.n2 {
                let (x1, x2) = self.center(mu, nu);
                out.push(f(x1, x2));
            }
        }
        out
    }

    /// `Σ M_{μν} h²`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h * self.h
    }

    /// Header comment with bounds and h, then `mu,nu,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let b = self.bounds;
        writeln!(out, "# l1={},r1={},l2={},r2={},h={}", b.l1, b.r1, b.l2, b.r2, self.h)?;
        writeln!(out, "mu,nu,value")?;
        for mu in 0..self.n1 {
            for nu in 0..self.n2 {
                writeln!(out, "{mu},{nu},{:e}", self.get(mu, nu))?;
            }
        }
        Ok(())
    }
}

/// `M_{μν} = (1/(N(0) h²)) Σ_i w_i 1_{Q^μ×Q^ν}(x_i1, x_i2)` on `bounds` widened to the lattice of side `h`.
pub fn project_2d(ensemble: &Ensemble, h: f64, bounds: ProjectionBounds) -> Result<ProjectionGrid> {
    if !(h > 0.0) {
        return Err(Error::config("projection cell side must be positive"));
    }
    if ensemble.dim() < 2 {
        return Err(Error::config("projection needs at least two coordinates"));
    }
    if !(bounds.r1 > bounds.l1 && bounds.r2 > bounds.l2) {
        return Err(Error::config(format!("projection bounds {bounds:?} have zero area")));
    }
    let bounds = bounds.fitted(h);
    let n1 = cells_along(bounds.l1, bounds.r1, h)?;
    let n2 = cells_along(bounds.l2, bounds.r2, h)?;
    let mut values = vec![0.0; n1 * n2];
    let mut dropped = 0;
    for (x, w) in ensemble.iter() {
        let mu = ((x[0] - bounds.l1) / h).floor();
        let nu = ((x[1] - bounds.l2) / h).floor();
        if mu < 0.0 || nu < 0.0 || mu >= n1 as f64 || nu >= n2 as f64 {
            dropped += 1;
            continue;
        }
        values[mu as usize * n2 + nu as usize] += w;
    }
    let scale = 1.0 / (ensemble.n0() as f64 * h * h);
    values.iter_mut().for_each(|v| *v *= scale);
    Ok(ProjectionGrid { bounds, h, n1, n2, values, dropped })
}

fn relative_l2(num: &[f64], reference: &[f64]) -> Result<f64> {
    let den: f64 = reference.iter().map(|r| r * r).sum();
    if !(den > 0.0) {
        return Err(Error::UndefinedMetric("reference has zero L2 norm".into()));
    }
    let diff: f64 = num.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((diff / den).sqrt())
}

/// `‖Ū − u_ref‖₂ / ‖u_ref‖₂` on the lattice nodes `k h` inside `[lo, hi]`.
///
/// Node `k h` reads the cell `[k h, (k + 1) h)`.
pub fn relative_l2_1d<F: Fn(f64) -> f64>(grid: &SparseGrid, reference: F, window: (f64, f64)) -> Result<f64> {
    let (num, refs) = audit_1d(grid, reference, window)?;
    relative_l2(&num, &refs)
}

/// Audit-grid samples `(Ū, u_ref)` used by [`relative_l2_1d`].
pub fn audit_1d<F: Fn(f64) -> f64>(
    grid: &SparseGrid,
    reference: F,
    window: (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = window;
    if !(hi > lo) {
        return Err(Error::config(format!("empty audit window [{lo}, {hi}]")));
    }
    if grid.dim() != 1 {
        return Err(Error::config("relative_l2_1d needs a one-dimensional grid"));
    }
    let h = grid.h();
    let first = (lo / h - 1e-9).ceil() as i64;
    let last = (hi / h + 1e-9).floor() as i64;
    let mut num = Vec::new();
    let mut refs = Vec::new();
    for k in first..=last {
        num.push(grid.average_of(&CellIndex::new(&[k])));
        refs.push(reference(k as f64 * h));
    }
    Ok((num, refs))
}

/// Relative L² error of a projection against `m_ref` at cell centers.
pub fn relative_l2_projection<F: Fn(f64, f64) -> f64>(num: &ProjectionGrid, reference: F) -> Result<f64> {
    relative_l2(&num.values, &num.tabulate(reference))
}

/// Which way the parameter refines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrderDirection {
    /// Error falls as the parameter grows (sample size).
    Increasing,
    /// Error falls as the parameter shrinks (τ, h).
    Decreasing,
}

/// Pairwise observed orders between consecutive `(parameter, error)` points.
pub fn convergence_order(points: &[(f64, f64)], direction: OrderDirection) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::config("need at least two points"));
    }
    if points.iter().any(|&(p, e)| !(p > 0.0) || !(e > 0.0)) {
        return Err(Error::config("parameters and errors must be positive"));
    }
    Ok(points
        .windows(2)
        .map(|w| {
            let (p0, e0) = w[0];
            let (p1, e1) = w[1];
            let ratio = match direction {
                OrderDirection::Increasing => p1 / p0,
                OrderDirection::Decreasing => p0 / p1,
            };
            (e0 / e1).ln() / ratio.ln()
        })
        .collect())
}

/// Pearson correlation coefficient.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Pearson correlation of a projection with a reference over the cells where
/// `|reference| > cutoff · max|reference|`.
pub fn masked_correlation<F: Fn(f64, f64) -> f64>(num: &ProjectionGrid, reference: F, cutoff: f64) -> f64 {
    let refs = num.tabulate(reference);
    let max = refs.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let (a, b): (Vec<f64>, Vec<f64>) =
        num.values.iter().zip(&refs).filter(|(_, r)| r.abs() > cutoff * max).map(|(v, r)| (*v, *r)).unzip();
    pearson(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vug::deposit;
    use proptest::prelude::*;

    #[test]
    fn single_particle_projection() {
        let mut e = Ensemble::new(2, 1).unwrap();
        e.push(&[0.05, 0.05], 1.0).unwrap();
        let p = project_2d(&e, 0.1, ProjectionBounds::square(-1.0, 1.0)).unwrap();
        assert_eq!((p.n1, p.n2), (20, 20));
        let (mu, nu) = (10, 10);
        assert!((p.get(mu, nu) - 100.0).abs() < 1e-9);
        assert_eq!(p.values.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn projection_equals_vug_in_2d() {
        let mut e = Ensemble::new(2, 7).unwrap();
        for (i, w) in [(0.13, 1.0), (0.71, -2.0), (-0.33, 0.5), (0.14, 0.25)] {
            e.push(&[i, -i * 0.5], w).unwrap();
        }
        let h = 0.2;
        let p = project_2d(&e, h, ProjectionBounds::square(-1.0, 1.0)).unwrap();
        let g = deposit(&e, h).unwrap();
        for mu in 0..p.n1 {
            for nu in 0..p.n2 {
                let (x1, x2) = p.center(mu, nu);
                assert!((p.get(mu, nu) - g.cell_average(&[x1, x2])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn projection_drops_out_of_bounds() {
        let mut e = Ensemble::new(3, 2).unwrap();
        e.push(&[10.0, 0.0, 0.0], 1.0).unwrap();
        e.push(&[0.0, 0.0, 9.0], 1.0).unwrap();
        let p = project_2d(&e, 0.5, ProjectionBounds::square(-1.0, 1.0)).unwrap();
        assert_eq!(p.dropped, 1);
        assert!((p.mass() - 0.5).abs() < 1e-12);
        assert!(project_2d(&e, 0.5, ProjectionBounds::square(1.0, 1.0)).is_err());
    }

    #[test]
    fn relative_l2_cases() {
        let h = 0.5;
        let f = |x: f64| (-x * x).exp();
        let cells: Vec<(CellIndex, f64)> =
            (-8..=8).map(|k| (CellIndex::new(&[k]), f(k as f64 * h) * h)).collect();
        let g = SparseGrid::from_cells(h, 1, 1, cells.clone()).unwrap();
        assert!(relative_l2_1d(&g, f, (-4.0, 4.0)).unwrap() < 1e-12);
        let g2 = SparseGrid::from_cells(h, 1, 1, cells.iter().map(|(k, w)| (k.clone(), 2.0 * w))).unwrap();
        assert!((relative_l2_1d(&g2, f, (-4.0, 4.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(relative_l2_1d(&g, |_| 0.0, (-4.0, 4.0)).is_err());
        assert!(relative_l2_1d(&g, f, (1.0, 1.0)).is_err());
    }

    #[test]
    fn projection_error_cases() {
        let mut p = ProjectionGrid {
            bounds: ProjectionBounds::square(0.0, 1.0),
            h: 0.5,
            n1: 2,
            n2: 2,
            values: vec![],
            dropped: 0,
        };
        let r = |x: f64, y: f64| x + 2.0 * y;
        p.values = p.tabulate(r);
        assert_eq!(relative_l2_projection(&p, r).unwrap(), 0.0);
        let eps = 0.01;
        let base = p.tabulate(r);
        p.values = base.iter().map(|v| v + eps).collect();
        let norm = base.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((relative_l2_projection(&p, r).unwrap() - eps * 2.0 / norm).abs() < 1e-12);
    }

    #[test]
    fn bounds_snap_to_lattice() {
        let b = ProjectionBounds::default().fitted(0.3);
        assert!((b.l1 + 6.0).abs() < 1e-12 && (b.r1 - 8.1).abs() < 1e-12);
        let mut ens = Ensemble::new(2, 1).unwrap();
        ens.push(&[8.05, 0.0], 1.0).unwrap();
        let p = project_2d(&ens, 0.3, ProjectionBounds::default()).unwrap();
        assert_eq!((p.n1, p.n2, p.dropped), (47, 47, 0));
        assert!(project_2d(&ens, 0.3, ProjectionBounds::square(1.0, 1.0)).is_err());
    }

    #[test]
    fn orders_from_table_values() {
        let o =
            convergence_order(&[(1e4, 0.5783), (4e4, 0.2988), (1.6e5, 0.1504)], OrderDirection::Increasing).unwrap();
        assert!((o[0] - 0.48).abs() < 0.005 && (o[1] - 0.49).abs() < 0.006, "{o:?}");
        let o = convergence_order(&[(0.25, 0.1023), (0.2, 0.0809), (0.1, 0.0414)], OrderDirection::Decreasing).unwrap();
        assert!((o[0] - 1.05).abs() < 0.005 && (o[1] - 0.97).abs() < 0.01, "{o:?}");
        let o = convergence_order(&[(1.0, 1.0), (4.0, 0.5)], OrderDirection::Increasing).unwrap();
        assert_eq!(o, vec![0.5]);
        assert!(convergence_order(&[(1.0, 1.0)], OrderDirection::Increasing).is_err());
        assert!(convergence_order(&[(1.0, 1.0), (2.0, 0.0)], OrderDirection::Increasing).is_err());
    }

    proptest! {
        #[test]
        fn power_law_order_is_exact(alpha in 0.1..3.0f64, p0 in 0.01..10.0f64, r in 1.1..5.0f64) {
            let pts: Vec<(f64, f64)> = (0..4).map(|i| {
                let p = p0 * r.powi(i);
                (p, p.powf(-alpha))
            }).collect();
            for o in convergence_order(&pts, OrderDirection::Increasing).unwrap() {
                prop_assert!((o - alpha).abs() < 1e-12);
            }
        }

        #[test]
        fn relative_metric_is_scale_invariant(s in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64]) {
            let num = [1.0, 2.0, -0.5, 0.1];
            let refs = [1.1, 1.7, -0.4, 0.0];
            let a = relative_l2(&num, &refs).unwrap();
            let sn: Vec<f64> = num.iter().map(|v| v * s).collect();
            let sr: Vec<f64> = refs.iter().map(|v| v * s).collect();
            prop_assert!((relative_l2(&sn, &sr).unwrap() - a).abs() < 1e-12);
        }

        #[test]
        fn projection_mass_matches_in_bounds_signed_mass(
            ps in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, prop_oneof![-1.0..-0.01f64, 0.01..1.0f64]), 1..100)
        ) {
            let mut e = Ensemble::new(2, 9).unwrap();
            for (x, y, w) in &ps {
                e.push(&[*x, *y], *w).unwrap();
            }
            let p = project_2d(&e, 0.25, ProjectionBounds::square(-1.0, 1.0)).unwrap();
            let inside = e.weak_sum(|x| if x.iter().all(|v| (-1.0..1.0).contains(v)) { 1.0 } else { 0.0 });
            let scale: f64 = ps.iter().map(|p| p.2.abs()).sum::<f64>() / 9.0;
            prop_assert!((p.mass() - inside).abs() <= 1e-10 * scale.max(1.0));
        }
    }
}
