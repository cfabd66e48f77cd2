//! Birth of particles from the nonlinear increment, annihilation by
//! resampling, and the full per-step resampling of baseline SPM.
//!
//! All three draw from a piecewise-constant density on VUG cells: a cell is
//! chosen categorically and the location is uniform inside it.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::particles::Ensemble;
use crate::rngkit::{Stream, StreamSpec};
use crate::vug::{CellIndex, FieldGrid, SparseGrid};

/// Number of particles to be born in one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BirthBudget {
    /// `Σ |f_k| h^d` over occupied cells.
    pub integral_abs_f: f64,
    /// `N(0) τ ∫|f|`.
    pub expected_births: f64,
    /// Stochastic rounding of `expected_births`.
    pub realized_births: usize,
}

/// `N_birth = N(0) τ ∫|f|`, rounded to `floor + Bernoulli(fraction)`.
pub fn birth_budget(fgrid: &FieldGrid, n0: usize, tau: f64, rng: &mut Stream) -> BirthBudget {
    let integral_abs_f = fgrid.integral_abs();
    let expected_births = n0 as f64 * tau * integral_abs_f;
    let whole = expected_births.floor();
    let frac = expected_births - whole;
    let extra = usize::from(frac > 0.0 && rng.random::<f64>() < frac);
    BirthBudget { integral_abs_f, expected_births, realized_births: whole as usize + extra }
}

/// Categorical table over cells with per-cell particle weight.
struct CellSampler<'a> {
    keys: &'a [CellIndex],
    cumulative: Vec<f64>,
    weights: Vec<f64>,
    h: f64,
    dim: usize,
}

impl<'a> CellSampler<'a> {
    /// `mass[k] ≥ 0` is the unnormalised probability of cell `k`.
    fn new(keys: &'a [CellIndex], mass: &[f64], weights: Vec<f64>, h: f64, dim: usize) -> Self {
        let mut acc = 0.0;
        let cumulative = mass
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        Self { keys, cumulative, weights, h, dim }
    }

    fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    fn pick(&self, rng: &mut Stream) -> usize {
        let total = self.total();
        loop {
            let target = rng.random::<f64>() * total;
            let k = self.cumulative.partition_point(|&c| c <= target);
            if k < self.cumulative.len() {
                return k;
            }
        }
    }

    fn draw(&self, count: usize, n0: usize, streams: StreamSpec, chunk_size: usize) -> Result<Ensemble> {
        let chunk_size = chunk_size.max(1);
        let n_chunks = count.div_ceil(chunk_size);
        let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
            .into_par_iter()
            .map(|c| {
                let len = chunk_size.min(count - c * chunk_size);
                let mut rng = streams.chunk(c as u64);
                let mut xs = Vec::with_capacity(len * self.dim);
                let mut ws = Vec::with_capacity(len);
                for _ in 0..len {
                    let k = self.pick(&mut rng);
                    let key = &self.keys[k];
                    for &i in key.coords() {
                        let mut x = (i as f64 + rng.random::<f64>()) * self.h;
                        if (x / self.h).floor() as i64 != i {
                            x = (i as f64 + 0.5) * self.h;
                        }
                        xs.push(x);
                    }
                    ws.push(self.weights[k]);
                }
                (xs, ws)
            })
            .collect();
        let mut positions = Vec::with_capacity(count * self.dim);
        let mut weights = Vec::with_capacity(count);
        for (xs, ws) in parts {
            positions.extend(xs);
            weights.extend(ws);
        }
        Ensemble::from_parts(self.dim, n0, positions, weights)
    }
}

/// Sample `count` newborn particles: cell `k` with probability `∝ |f_k| h^d`,
/// uniform inside, weight `sign(f_k)`.
pub fn sample_births(
    fgrid: &FieldGrid,
    count: usize,
    n0: usize,
    streams: StreamSpec,
    chunk_size: usize,
) -> Result<Ensemble> {
    if count == 0 {
        return Ensemble::new(fgrid.dim(), n0);
    }
    let mass: Vec<f64> = fgrid.values().iter().map(|f| f.abs()).collect();
    let signs: Vec<f64> = fgrid.values().iter().map(|f| f.signum()).collect();
    let sampler = CellSampler::new(fgrid.keys(), &mass, signs, fgrid.h(), fgrid.dim());
    if !(sampler.total() > 0.0) {
        return Err(Error::config(format!("cannot sample {count} births from an all-zero field")));
    }
    sampler.draw(count, n0, streams, chunk_size)
}

/// Replace the ensemble by `N(0)` particles drawn from `|Ū| / Z` with
/// weights `Z · sign(Ū)`, `Z = Σ |Ū_k| h^d`.
pub fn annihilate(grid: &SparseGrid, n0: usize, streams: StreamSpec, chunk_size: usize) -> Result<Ensemble> {
    let z = grid.l1_mass();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::DegenerateSolution(format!(
            "piecewise-constant reconstruction has L1 mass {z}, nothing to resample"
        )));
    }
    let keys: Vec<CellIndex> = grid.keys().cloned().collect();
    let mass: Vec<f64> = grid.iter().map(|(_, w)| w.abs()).collect();
    let weights: Vec<f64> = grid.iter().map(|(_, w)| z * w.signum()).collect();
    CellSampler::new(&keys, &mass, weights, grid.h(), grid.dim()).draw(n0, n0, streams, chunk_size)
}

/// Baseline SPM: draw `N(0)` particles from `|Ū + τf| / Z'` with weights
/// `Z' · sign(Ū + τf)`, `Z' = Σ |Ū_k + τ f_k| h^d`.
pub fn spm_full_resample(
    grid: &SparseGrid,
    fgrid: &FieldGrid,
    n0: usize,
    tau: f64,
    streams: StreamSpec,
    chunk_size: usize,
) -> Result<Ensemble> {
    if grid.len() != fgrid.len() || grid.keys().zip(fgrid.keys()).any(|(a, b)| a != b) {
        return Err(Error::config("field grid was not tabulated from this solution grid"));
    }
    let vol = grid.cell_volume();
    let combined: Vec<f64> = grid.keys().zip(fgrid.values()).map(|(k, f)| grid.average_of(k) + tau * f).collect();
    let mass: Vec<f64> = combined.iter().map(|g| g.abs()).collect();
    let z = crate::particles::pairwise_sum(&mass) * vol;
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::DegenerateSolution(format!("|U + tau f| has discrete L1 mass {z}")));
    }
    let weights: Vec<f64> = combined.iter().map(|g| z * g.signum()).collect();
    CellSampler::new(fgrid.keys(), &mass, weights, grid.h(), grid.dim()).draw(n0, n0, streams, chunk_size)
}
