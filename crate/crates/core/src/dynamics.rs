//! Particle motion under the adjoint semigroup `e^{τL*}` for `L = b·∇ + cΔ`.
//!
//! Advection shifts every particle along the characteristic, `x ← x − bτ`.
//! Diffusion adds an independent `N(0, 2cτ I)` increment.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::particles::Ensemble;
use crate::rngkit::StreamSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    pub advection: Vec<f64>,
    pub diffusion: f64,
}

impl LinearOperator {
    pub fn new(advection: Vec<f64>, diffusion: f64) -> Result<Self> {
        if !(diffusion >= 0.0 && diffusion.is_finite()) {
            return Err(Error::config(format!("diffusion must be nonnegative, got {diffusion}")));
        }
        if advection.iter().any(|b| !b.is_finite()) {
            return Err(Error::config("advection vector must be finite"));
        }
        Ok(Self { advection, diffusion })
    }

    pub fn heat(dim: usize, c: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], c)
    }

    pub fn dim(&self) -> usize {
        self.advection.len()
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::config(format!("time step must be positive, got {tau}")));
    }
    Ok(())
}

pub fn advect(ensemble: &mut Ensemble, b: &[f64], tau: f64) -> Result<()> {
    check_tau(tau)?;
    let dim = ensemble.dim();
    if b.len() != dim {
        return Err(Error::config(format!("advection has dimension {}, ensemble {dim}", b.len())));
    }
    if b.iter().all(|&bj| bj == 0.0) {
        return Ok(());
    }
    let shift: Vec<f64> = b.iter().map(|bj| bj * tau).collect();
    ensemble.positions_mut().par_chunks_mut(dim).for_each(|x| {
        for (xj, s) in x.iter_mut().zip(&shift) {
            *xj -= s;
        }
    });
    Ok(())
}

/// Gaussian kicks with per-component variance `2cτ`; chunk `k` of
/// `chunk_size` particles draws from stream `k` of `streams`.
pub fn diffuse(ensemble: &mut Ensemble, c: f64, tau: f64, streams: StreamSpec, chunk_size: usize) -> Result<()> {
    check_tau(tau)?;
    if c < 0.0 {
        return Err(Error::config(format!("diffusion must be nonnegative, got {c}")));
    }
    if c == 0.0 {
        return Ok(());
    }
    let sigma = (2.0 * c * tau).sqrt();
    let dim = ensemble.dim();
    ensemble.positions_mut().par_chunks_mut(chunk_size.max(1) * dim).enumerate().for_each(|(k, xs)| {
        let mut rng = streams.chunk(k as u64);
        for xj in xs.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xj += sigma * z;
        }
    });
    Ok(())
}

/// `advect` followed by `diffuse`.
pub fn apply_semigroup(
    ensemble: &mut Ensemble,
    op: &LinearOperator,
    tau: f64,
    streams: StreamSpec,
    chunk_size: usize,
) -> Result<()> {
    advect(ensemble, &op.advection, tau)?;
    diffuse(ensemble, op.diffusion, tau, streams, chunk_size)?;
    ensemble.time += tau;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngkit::Purpose;

    fn line(n: usize) -> Ensemble {
        let mut e = Ensemble::with_capacity(1, n, n).unwrap();
        for i in 0..n {
            e.push(&[i as f64 * 1e-3], if i % 2 == 0 { 1.0 } else { -2.0 }).unwrap();
        }
        e
    }

    fn moments(before: &Ensemble, after: &Ensemble, axis: usize) -> (f64, f64, usize) {
        let d = before.dim();
        let disp: Vec<f64> =
            before.positions().iter().zip(after.positions()).skip(axis).step_by(d).map(|(a, b)| b - a).collect();
        let n = disp.len();
        let mean = disp.iter().sum::<f64>() / n as f64;
        let var = disp.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var, n)
    }

    #[test]
    fn advection_cases() {
        let mut e = Ensemble::new(1, 1).unwrap();
        e.push(&[0.0], 1.0).unwrap();
        advect(&mut e, &[1.0], 0.1).unwrap();
        assert_eq!(e.location(0), &[-0.1]);

        let orig = line(10);
        let mut same = orig.clone();
        advect(&mut same, &[0.0], 0.3).unwrap();
        assert_eq!(same, orig);

        let mut halves = orig.clone();
        advect(&mut halves, &[0.5], 0.25).unwrap();
        advect(&mut halves, &[0.5], 0.25).unwrap();
        let mut whole = orig.clone();
        advect(&mut whole, &[0.5], 0.5).unwrap();
        assert_eq!(halves, whole);

        assert!(advect(&mut whole, &[0.5], 0.0).is_err());
        assert!(advect(&mut whole, &[0.5, 1.0], 0.1).is_err());
    }

    #[test]
    fn zero_diffusion_is_identity() {
        let orig = line(100);
        let mut e = orig.clone();
        diffuse(&mut e, 0.0, 0.1, StreamSpec::new(1, Purpose::Diffusion, 0), 16).unwrap();
        assert_eq!(e, orig);
    }

    #[test]
    fn diffusion_variance_and_mean() {
        let n = 1_000_000;
        let orig = line(n);
        let mut e = orig.clone();
        diffuse(&mut e, 1.0, 0.1, StreamSpec::new(3, Purpose::Diffusion, 0), 1 << 14).unwrap();
        let (mean, var, n) = moments(&orig, &e, 0);
        let target = 0.2;
        let se_var = target * (2.0 / (n - 1) as f64).sqrt();
        let se_mean = (target / n as f64).sqrt();
        assert!((var - target).abs() < 3.0 * se_var, "var {var}");
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean}");
        assert_eq!(e.weights(), orig.weights());
    }

    #[test]
    fn semigroup_with_drift() {
        let n = 1_000_000;
        let orig = line(n);
        let mut e = orig.clone();
        let op = LinearOperator::new(vec![1.0], 1.0).unwrap();
        apply_semigroup(&mut e, &op, 0.1, StreamSpec::new(4, Purpose::Diffusion, 0), 1 << 14).unwrap();
        let (mean, var, n) = moments(&orig, &e, 0);
        assert!((mean + 0.1).abs() < 3.0 * (0.2 / n as f64).sqrt(), "mean {mean}");
        assert!((var - 0.2).abs() < 3.0 * 0.2 * (2.0 / (n - 1) as f64).sqrt(), "var {var}");
        assert_eq!(e.count(), orig.count());
        assert!((e.time - 0.1).abs() < 1e-15);
    }

    #[test]
    fn six_dimensional_components() {
        let n = 100_000;
        let mut orig = Ensemble::with_capacity(6, n, n).unwrap();
        for _ in 0..n {
            orig.push(&[0.0; 6], 1.0).unwrap();
        }
        let mut e = orig.clone();
        let op = LinearOperator::heat(6, 1.0).unwrap();
        apply_semigroup(&mut e, &op, 0.1, StreamSpec::new(9, Purpose::Diffusion, 2), 4096).unwrap();
        for axis in 0..6 {
            let (_, var, n) = moments(&orig, &e, axis);
            assert!((var - 0.2).abs() < 3.0 * 0.2 * (2.0 / (n - 1) as f64).sqrt(), "axis {axis}: {var}");
        }
    }

    #[test]
    fn reproducible_for_fixed_chunking() {
        let orig = line(5000);
        let run = || {
            let mut e = orig.clone();
            diffuse(&mut e, 0.5, 0.1, StreamSpec::new(11, Purpose::Diffusion, 7), 333).unwrap();
            e
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn operator_validation() {
        assert!(LinearOperator::new(vec![0.0], -1.0).is_err());
        assert!(LinearOperator::new(vec![f64::NAN], 1.0).is_err());
    }
}
