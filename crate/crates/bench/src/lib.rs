//! Fixtures shared by the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use spm_core::Ensemble;

/// `n` unit-weight particles drawn from a standard normal in `dim` dimensions.
pub fn gaussian_ensemble(dim: usize, n: usize, seed: u64) -> Ensemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ens = Ensemble::with_capacity(dim, n, n).expect("valid ensemble");
    let mut x = vec![0.0; dim];
    for _ in 0..n {
        for xj in x.iter_mut() {
            *xj = StandardNormal.sample(&mut rng);
        }
        ens.push(&x, 1.0).expect("finite particle");
    }
    ens
}
