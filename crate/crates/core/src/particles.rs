//! Weighted particles and the ensemble `X_t = (1/N(0)) Σ w_i δ_{x_i}`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::DEFAULT_CHUNK_SIZE;

/// A single weighted particle.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub location: Vec<f64>,
    pub weight: f64,
}

impl Particle {
    pub fn new(location: Vec<f64>, weight: f64) -> Result<Self> {
        check(&location, weight)?;
        Ok(Self { location, weight })
    }
}

fn check(location: &[f64], weight: f64) -> Result<()> {
    if let Some(x) = location.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidParticle(format!("non-finite coordinate {x}")));
    }
    if !weight.is_finite() || weight == 0.0 {
        return Err(Error::InvalidParticle(format!("weight must be finite and nonzero, got {weight}")));
    }
    Ok(())
}

/// The particle cloud. Locations are stored flat (`dim` values per particle).
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    dim: usize,
    n0: usize,
    pub time: f64,
    positions: Vec<f64>,
    weights: Vec<f64>,
}

impl Ensemble {
    pub fn new(dim: usize, n0: usize) -> Result<Self> {
        Self::with_capacity(dim, n0, 0)
    }

    pub fn with_capacity(dim: usize, n0: usize, capacity: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("dimension must be positive"));
        }
        if n0 == 0 {
            return Err(Error::config("N(0) must be positive"));
        }
        Ok(Self {
            dim,
            n0,
            time: 0.0,
            positions: Vec::with_capacity(capacity * dim),
            weights: Vec::with_capacity(capacity),
        })
    }

    /// Build from flat storage, validating every particle.
    pub fn from_parts(dim: usize, n0: usize, positions: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let mut e = Self::new(dim, n0)?;
        if positions.len() != weights.len() * dim {
            return Err(Error::InvalidParticle(format!(
                "{} coordinates do not match {} particles of dimension {dim}",
                positions.len(),
                weights.len()
            )));
        }
        for (x, &w) in positions.chunks_exact(dim).zip(&weights) {
            check(x, w)?;
        }
        e.positions = positions;
        e.weights = weights;
        Ok(e)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The initial sample count `N(0)`, fixed for the lifetime of the ensemble.
    pub fn n0(&self) -> usize {
        self.n0
    }

    /// Current particle count `N(t)`.
    pub fn count(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn push(&mut self, location: &[f64], weight: f64) -> Result<()> {
        if location.len() != self.dim {
            return Err(Error::InvalidParticle(format!(
                "location has dimension {}, ensemble has {}",
                location.len(),
                self.dim
            )));
        }
        check(location, weight)?;
        self.positions.extend_from_slice(location);
        self.weights.push(weight);
        Ok(())
    }

    pub fn push_particle(&mut self, p: &Particle) -> Result<()> {
        self.push(&p.location, p.weight)
    }

    /// Append all particles of `other` (same dimension).
    pub fn append(&mut self, other: &mut Ensemble) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::InvalidParticle(format!(
                "cannot append dimension {} particles to dimension {}",
                other.dim, self.dim
            )));
        }
        self.positions.append(&mut other.positions);
        self.weights.append(&mut other.weights);
        Ok(())
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [f64] {
        &mut self.positions
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.positions.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    pub fn to_particles(&self) -> Vec<Particle> {
        self.iter().map(|(x, w)| Particle { location: x.to_vec(), weight: w }).collect()
    }

    /// `(1/N(0)) Σ w_i φ(x_i)`.
    pub fn weak_sum<F>(&self, testfn: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.weak_sum_chunked(testfn, DEFAULT_CHUNK_SIZE)
    }

    /// Weak sum with partial sums over fixed-size chunks, reduced pairwise in
    /// chunk order. The result depends on `chunk_size` but not on threading.
    pub fn weak_sum_chunked<F>(&self, testfn: F, chunk_size: usize) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let chunk_size = chunk_size.max(1);
        let partials: Vec<f64> = self
            .positions
            .par_chunks(chunk_size * self.dim)
            .zip(self.weights.par_chunks(chunk_size))
            .map(|(xs, ws)| xs.chunks_exact(self.dim).zip(ws).map(|(x, &w)| w * testfn(x)).sum::<f64>())
            .collect();
        pairwise_sum(&partials) / self.n0 as f64
    }

    /// Weak sum against the constant test function 1.
    pub fn signed_mass(&self) -> f64 {
        self.weak_sum(|_| 1.0)
    }

    /// Drop all particles, keeping `n0`, `dim` and `time`.
    pub fn clear(&mut self) {
        self.positions = Vec::new();
        self.weights = Vec::new();
    }
}

pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn ens(dim: usize, n0: usize, ps: &[(&[f64], f64)]) -> Ensemble {
        let mut e = Ensemble::new(dim, n0).unwrap();
        for (x, w) in ps {
            e.push(x, *w).unwrap();
        }
        e
    }

    #[test]
    fn single_particle_weak_sum() {
        let e = ens(1, 1, &[(&[0.0], 2.0)]);
        assert_eq!(e.weak_sum(|_| 1.0), 2.0);
    }

    #[test]
    fn opposite_weights_cancel() {
        let e = ens(1, 2, &[(&[0.0], 1.0), (&[5.0], -1.0)]);
        assert_eq!(e.weak_sum(|_| 1.0), 0.0);
    }

    #[test]
    fn gaussian_indicator_mass() {
        let n = 100_000;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut e = Ensemble::with_capacity(1, n, n).unwrap();
        for _ in 0..n {
            let x: f64 = StandardNormal.sample(&mut rng);
            e.push(&[x], 1.0).unwrap();
        }
        let est = e.weak_sum(|x| if x[0].abs() <= 1.0 { 1.0 } else { 0.0 });
        let p = statrs::function::erf::erf(1.0 / 2f64.sqrt());
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((est - p).abs() < 3.0 * se, "{est} vs {p}");
    }

    #[test]
    fn signed_mass_cases() {
        assert_eq!(ens(1, 1, &[(&[0.3], 3.0)]).signed_mass(), 3.0);
        assert_eq!(Ensemble::new(2, 10).unwrap().signed_mass(), 0.0);
    }

    #[test]
    fn rejects_bad_particles() {
        let mut e = Ensemble::new(2, 1).unwrap();
        assert!(e.push(&[0.0, 1.0], 0.0).is_err());
        assert!(e.push(&[f64::NAN, 1.0], 1.0).is_err());
        assert!(e.push(&[0.0, f64::INFINITY], 1.0).is_err());
        assert!(e.push(&[0.0], 1.0).is_err());
        assert!(e.push(&[0.0, 1.0], f64::NAN).is_err());
        assert!(Particle::new(vec![1.0], 0.0).is_err());
        assert!(Ensemble::new(0, 1).is_err());
        assert!(Ensemble::new(1, 0).is_err());
        assert_eq!(e.count(), 0);
    }

    #[test]
    fn chunked_sum_matches_for_any_chunk_size() {
        let e = ens(1, 3, &[(&[0.0], 1.0), (&[1.0], 2.0), (&[2.0], 4.0)]);
        for c in 1..5 {
            assert_eq!(e.weak_sum_chunked(|x| x[0], c), (2.0 + 8.0) / 3.0);
        }
    }

    fn arb_particles() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((-10.0..10.0f64, prop_oneof![-5.0..-0.01f64, 0.01..5.0f64]), 1..60)
    }

    proptest! {
        #[test]
        fn weak_sum_is_linear_and_homogeneous(ps in arb_particles(), a in -3.0..3.0f64, s in 0.1..4.0f64) {
            let e = ens(1, 7, &ps.iter().map(|(x, w)| (std::slice::from_ref(x), *w)).collect::<Vec<_>>());
            let f = |x: &[f64]| x[0].sin();
            let g = |x: &[f64]| x[0] * x[0];
            let lhs = e.weak_sum(|x| a * f(x) + g(x));
            let rhs = a * e.weak_sum(f) + e.weak_sum(g);
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));

            let scaled = ens(1, 7, &ps.iter().map(|(x, w)| (std::slice::from_ref(x), *w * s)).collect::<Vec<_>>());
            let hs = scaled.weak_sum(f);
            prop_assert!((hs - s * e.weak_sum(f)).abs() < 1e-9 * (1.0 + hs.abs()));
        }

        #[test]
        fn weak_sum_is_permutation_invariant(ps in arb_particles()) {
            let fwd = ens(1, 3, &ps.iter().map(|(x, w)| (std::slice::from_ref(x), *w)).collect::<Vec<_>>());
            let rev = ens(1, 3, &ps.iter().rev().map(|(x, w)| (std::slice::from_ref(x), *w)).collect::<Vec<_>>());
            let f = |x: &[f64]| (0.3 * x[0]).cos();
            prop_assert!((fwd.weak_sum(f) - rev.weak_sum(f)).abs() < 1e-10);
        }
    }
}
