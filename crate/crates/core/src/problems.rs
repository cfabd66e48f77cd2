//! Problem definitions: the 1-D benchmark `u_t = u_x + u_xx + u − u³` and the
//! d-D Allen-Cahn equation with a manufactured forcing.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::dynamics::LinearOperator;
use crate::error::{Error, Result};
use crate::particles::Ensemble;
use crate::quadrature::adaptive_simpson;
use crate::reference::{strang_run, ReferenceConfig, ReferenceSolution};
use crate::rngkit::StreamSpec;

/// Centers of the two Gaussian bumps of the Allen-Cahn solution (first two coordinates).
pub const AC_CENTERS: [[f64; 2]; 2] = [[2.0, 2.0], [-1.0, -1.0]];
/// Amplitudes of the two bumps.
pub const AC_AMPLITUDES: [f64; 2] = [1.0, 2.0];

/// Nonlinear term `f(t, x, u, ∇u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearTerm {
    Zero,
    /// `λ u`
    Linear(f64),
    /// `u − u³`
    Bistable,
    /// `u − u³ + r(x, t)` with `r` the residual of the analytical solution.
    ForcedAllenCahn {
        dim: usize,
        diffusion: f64,
    },
}

impl NonlinearTerm {
    pub fn eval(&self, t: f64, x: &[f64], u: f64, _grad: &[f64]) -> f64 {
        match self {
            NonlinearTerm::Zero => 0.0,
            NonlinearTerm::Linear(rate) => rate * u,
            NonlinearTerm::Bistable => u - u * u * u,
            NonlinearTerm::ForcedAllenCahn { diffusion, .. } => u - u * u * u + forcing_r(x, t, *diffusion),
        }
    }

    pub fn uses_gradient(&self) -> bool {
        false
    }
}

/// `u0(x) = exp(−x²)(1 + x⁴)`.
pub fn benchmark_u0(x: f64) -> f64 {
    (-x * x).exp() * (1.0 + x.powi(4))
}

fn ac_bumps(x: &[f64], t: f64, c: f64) -> (f64, [f64; 2]) {
    let a = 1.0 + 4.0 * c * t;
    let d = x.len() as f64;
    let norm = (PI * a).powf(-0.5 * d);
    let tail: f64 = x[2..].iter().map(|v| v * v).sum();
    let mut h = [0.0; 2];
    for (k, p) in AC_CENTERS.iter().enumerate() {
        let q = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2) + tail;
        h[k] = AC_AMPLITUDES[k] * norm * (-q / a).exp();
    }
    (a, h)
}

/// Analytical Allen-Cahn solution
/// `(x1 + x2)/(π a)^{d/2} · [exp(−|x−p1|²/a) + 2 exp(−|x−p2|²/a)]`, `a = 1 + 4ct`.
pub fn u_ref(x: &[f64], t: f64, c: f64) -> f64 {
    let (_, h) = ac_bumps(x, t, c);
    (x[0] + x[1]) * (h[0] + h[1])
}

/// Forcing that makes [`u_ref`] an exact solution of `u_t = cΔu + u − u³ + r`.
///
/// Each bump is a heat kernel, so `∂_t u − cΔu = −2c ∂_{x1+x2}(bumps)`, which
/// gives `r = (4c/a) Σ_k H_k [(x1 − p_k1) + (x2 − p_k2)] − u + u³`.
pub fn forcing_r(x: &[f64], t: f64, c: f64) -> f64 {
    let (a, h) = ac_bumps(x, t, c);
    let u = (x[0] + x[1]) * (h[0] + h[1]);
    let mut drift = 0.0;
    for (k, p) in AC_CENTERS.iter().enumerate() {
        drift += h[k] * ((x[0] - p[0]) + (x[1] - p[1]));
    }
    4.0 * c / a * drift - u + u * u * u
}

/// `M(x1, x2, t) = ∫ u_ref dx3…dxd`, independent of the dimension.
pub fn m_ref(x1: f64, x2: f64, t: f64, c: f64) -> f64 {
    u_ref(&[x1, x2], t, c)
}

/// Initial data `u0` together with its sampler.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Benchmark1d,
    AllenCahn {
        dim: usize,
    },
    /// `amplitude · N(0, variance I)` density.
    Gaussian {
        dim: usize,
        variance: f64,
        amplitude: f64,
    },
}

/// Lower bound on the rejection sampler acceptance rate.
const MIN_ACCEPTANCE: f64 = 1e-4;
const AC_PROPOSAL_VARIANCE: f64 = 0.75;

impl InitialData {
    pub fn dim(&self) -> usize {
        match self {
            InitialData::Benchmark1d => 1,
            InitialData::AllenCahn { dim } | InitialData::Gaussian { dim, .. } => *dim,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            InitialData::Benchmark1d => benchmark_u0(x[0]),
            InitialData::AllenCahn { .. } => u_ref(x, 0.0, 1.0),
            InitialData::Gaussian { dim, variance, amplitude } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amplitude * (2.0 * PI * variance).powf(-0.5 * *dim as f64) * (-0.5 * r2 / variance).exp()
            }
        }
    }

    /// `Z0 = ∫|u0|`, computed by deterministic quadrature.
    pub fn l1_norm(&self) -> f64 {
        match self {
            InitialData::Benchmark1d => adaptive_simpson(|x| benchmark_u0(x).abs(), -12.0, 12.0, 1e-13),
            InitialData::AllenCahn { .. } => {
                let (neg, pos) = ac_signed_halves();
                neg + pos
            }
            InitialData::Gaussian { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Fraction of `∫|u0|` carried by the region where `u0 < 0`.
    pub fn negative_fraction(&self) -> f64 {
        match self {
            InitialData::Benchmark1d => 0.0,
            InitialData::AllenCahn { .. } => {
                let (neg, pos) = ac_signed_halves();
                neg / (neg + pos)
            }
            InitialData::Gaussian { amplitude, .. } => {
                if *amplitude < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `∫ u0`.
    pub fn integral(&self) -> f64 {
        match self {
            InitialData::Benchmark1d => self.l1_norm(),
            InitialData::AllenCahn { .. } => {
                let (neg, pos) = ac_signed_halves();
                pos - neg
            }
            InitialData::Gaussian { amplitude, .. } => *amplitude,
        }
    }

    /// Draw `n` particles from `|u0| / Z0` with weights `sign(u0) · Z0`.
    ///
    /// Chunk `k` of `chunk_size` samples uses stream `k`. If any candidate
    /// exceeds the envelope, the envelope is doubled and sampling restarts.
    pub fn sample(&self, n: usize, n0: usize, streams: StreamSpec, chunk_size: usize) -> Result<Ensemble> {
        let dim = self.dim();
        let z0 = self.l1_norm();
        if !(z0 > 0.0 && z0.is_finite()) {
            return Err(Error::config(format!("initial data must have positive finite L1 norm, got {z0}")));
        }
        let chunk_size = chunk_size.max(1);
        let n_chunks = n.div_ceil(chunk_size);
        let mut envelope = self.envelope();
        loop {
            let results: Vec<ChunkDraw> = (0..n_chunks)
                .into_par_iter()
                .map(|k| {
                    let len = chunk_size.min(n - k * chunk_size);
                    self.sample_chunk(len, envelope, &mut streams.chunk(k as u64))
                })
                .collect();
            if results.iter().any(|r| r.overflow) {
                envelope *= 2.0;
                continue;
            }
            let trials: u64 = results.iter().map(|r| r.trials).sum();
            if n > 0 && (n as f64 / trials as f64) < MIN_ACCEPTANCE {
                return Err(Error::config(format!(
                    "initial sampler acceptance rate {:.2e} is below {MIN_ACCEPTANCE:.0e}",
                    n as f64 / trials as f64
                )));
            }
            let mut positions = Vec::with_capacity(n * dim);
            let mut weights = Vec::with_capacity(n);
            for r in results {
                positions.extend(r.positions);
                weights.extend(r.signs.into_iter().map(|s| s * z0));
            }
            return Ensemble::from_parts(dim, n0, positions, weights);
        }
    }

    /// Constant `M` with `|u0| ≤ M q` for the proposal density `q`.
    fn envelope(&self) -> f64 {
        match self {
            InitialData::Benchmark1d => {
                let m = (0..=20_000)
                    .map(|i| {
                        let x = -10.0 + i as f64 * 1e-3;
                        benchmark_u0(x) / std_normal_pdf(x)
                    })
                    .fold(0.0, f64::max);
                1.01 * m
            }
            InitialData::AllenCahn { dim } => {
                // ratio is maximal at x3 = … = xd = 0; coarse search over (x1, x2)
                let mut x = vec![0.0; *dim];
                let mut m: f64 = 0.0;
                for i in 0..=320 {
                    for j in 0..=320 {
                        x[0] = -8.0 + 0.05 * i as f64;
                        x[1] = -8.0 + 0.05 * j as f64;
                        m = m.max(self.eval(&x).abs() / ac_proposal_pdf(&x));
                    }
                }
                1.1 * m
            }
            InitialData::Gaussian { .. } => 1.0,
        }
    }

    fn sample_chunk<R: Rng>(&self, len: usize, envelope: f64, rng: &mut R) -> ChunkDraw {
        let dim = self.dim();
        let mut out = ChunkDraw {
            positions: Vec::with_capacity(len * dim),
            signs: Vec::with_capacity(len),
            trials: 0,
            overflow: false,
        };
        let mut x = vec![0.0; dim];
        while out.signs.len() < len {
            out.trials += 1;
            let q = match self {
                InitialData::Benchmark1d => {
                    x[0] = StandardNormal.sample(rng);
                    std_normal_pdf(x[0])
                }
                InitialData::AllenCahn { .. } => {
                    let center = AC_CENTERS[usize::from(rng.random::<bool>())];
                    let s = AC_PROPOSAL_VARIANCE.sqrt();
                    for (j, xj) in x.iter_mut().enumerate() {
                        let z: f64 = StandardNormal.sample(rng);
                        *xj = if j < 2 { center[j] } else { 0.0 } + s * z;
                    }
                    ac_proposal_pdf(&x)
                }
                InitialData::Gaussian { variance, amplitude, .. } => {
                    for xj in x.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *xj = variance.sqrt() * z;
                    }
                    out.positions.extend_from_slice(&x);
                    out.signs.push(amplitude.signum());
                    continue;
                }
            };
            let u = self.eval(&x);
            let ratio = u.abs() / (envelope * q);
            if ratio > 1.0 {
                out.overflow = true;
                return out;
            }
            if u != 0.0 && rng.random::<f64>() < ratio {
                out.positions.extend_from_slice(&x);
                out.signs.push(u.signum());
            }
        }
        out
    }
}

struct ChunkDraw {
    positions: Vec<f64>,
    signs: Vec<f64>,
    trials: u64,
    overflow: bool,
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

fn ac_proposal_pdf(x: &[f64]) -> f64 {
    let v = AC_PROPOSAL_VARIANCE;
    let norm = (2.0 * PI * v).powf(-0.5 * x.len() as f64);
    let tail: f64 = x[2..].iter().map(|y| y * y).sum();
    AC_CENTERS
        .iter()
        .map(|p| {
            let q = (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2) + tail;
            0.5 * norm * (-0.5 * q / v).exp()
        })
        .sum()
}

/// `(∫_{u0<0} |u0|, ∫_{u0>0} |u0|)` for the Allen-Cahn initial data.
///
/// In rotated coordinates `s = (x1 + x2)/√2`, `v = (x1 − x2)/√2` both bumps
/// sit on `v = 0`, so after integrating out `v` and `x3..xd` only a 1-D
/// integral in `s` remains: `(√2/√π) ∫ s [e^{−(s−2√2)²} + 2e^{−(s+√2)²}] ds`.
fn ac_signed_halves() -> (f64, f64) {
    let r2 = std::f64::consts::SQRT_2;
    let centers = [2.0 * r2, -r2];
    let density = |s: f64| {
        let bumps: f64 = centers.iter().zip(AC_AMPLITUDES).map(|(cs, amp)| amp * (-(s - cs).powi(2)).exp()).sum();
        r2 / PI.sqrt() * s.abs() * bumps
    };
    let neg = adaptive_simpson(density, -15.0, 0.0, 1e-14);
    let pos = adaptive_simpson(density, 0.0, 15.0, 1e-14);
    (neg, pos)
}

/// Reference solution used by the error metrics.
#[derive(Debug, Clone)]
pub enum Reference {
    /// Analytical Allen-Cahn solution with the given diffusion coefficient.
    AllenCahn { diffusion: f64 },
    /// Tabulated 1-D reference from the deterministic solver.
    Tabulated(Arc<ReferenceSolution>),
}

impl Reference {
    /// `u_ref(x, t)` if available at time `t`.
    pub fn solution(&self, x: &[f64], t: f64) -> Option<f64> {
        match self {
            Reference::AllenCahn { diffusion } => Some(u_ref(x, t, *diffusion)),
            Reference::Tabulated(table) => table.eval(x[0], t),
        }
    }

    /// 2-D projection `M(x1, x2, t)` if available.
    pub fn projection(&self, x1: f64, x2: f64, t: f64) -> Option<f64> {
        match self {
            Reference::AllenCahn { diffusion } => Some(m_ref(x1, x2, t, *diffusion)),
            Reference::Tabulated(_) => None,
        }
    }

    pub fn has_time(&self, t: f64) -> bool {
        match self {
            Reference::AllenCahn { .. } => true,
            Reference::Tabulated(table) => table.snapshot(t).is_some(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub op: LinearOperator,
    pub nonlinear: NonlinearTerm,
    pub initial: InitialData,
    pub reference: Option<Reference>,
}

impl ProblemSpec {
    pub fn with_reference(mut self, reference: Reference) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.op.dim() != self.dim || self.initial.dim() != self.dim {
            return Err(Error::config(format!(
                "problem '{}' mixes dimensions (op {}, initial {}, declared {})",
                self.name,
                self.op.dim(),
                self.initial.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Look a problem up by its CLI name.
    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        match name {
            "benchmark1d" => {
                if dim != 1 {
                    return Err(Error::config("benchmark1d is one-dimensional"));
                }
                Ok(benchmark_1d())
            }
            "allen-cahn" => allen_cahn(dim),
            other => Err(Error::config(format!("unknown problem '{other}' (expected benchmark1d or allen-cahn)"))),
        }
    }
}

/// `u_t = u_x + u_xx + u − u³`, `u0 = exp(−x²)(1 + x⁴)`.
pub fn benchmark_1d() -> ProblemSpec {
    ProblemSpec {
        name: "benchmark1d".into(),
        dim: 1,
        op: LinearOperator { advection: vec![1.0], diffusion: 1.0 },
        nonlinear: NonlinearTerm::Bistable,
        initial: InitialData::Benchmark1d,
        reference: None,
    }
}

/// Edge-to-peak ratio above which a tabulated reference is rejected.
pub const REFERENCE_EDGE_LIMIT: f64 = 1e-8;

/// [`benchmark_1d`] with a Strang reference tabulated at `report_times`.
pub fn benchmark_1d_with_reference(
    config: &ReferenceConfig,
    final_time: f64,
    report_times: &[f64],
) -> Result<ProblemSpec> {
    let table = strang_run(config, benchmark_u0, final_time, report_times)?;
    let edge = table.edge_ratio();
    if edge > REFERENCE_EDGE_LIMIT {
        return Err(Error::BoundaryContamination { edge, limit: REFERENCE_EDGE_LIMIT });
    }
    Ok(benchmark_1d().with_reference(Reference::Tabulated(Arc::new(table))))
}

/// `u_t = Δu + u − u³ + r` in `d ≥ 2` dimensions with the analytical reference.
pub fn allen_cahn(dim: usize) -> Result<ProblemSpec> {
    if dim < 2 {
        return Err(Error::config(format!("allen-cahn needs d >= 2, got {dim}")));
    }
    let c = 1.0;
    Ok(ProblemSpec {
        name: "allen-cahn".into(),
        dim,
        op: LinearOperator::heat(dim, c)?,
        nonlinear: NonlinearTerm::ForcedAllenCahn { dim, diffusion: c },
        initial: InitialData::AllenCahn { dim },
        reference: Some(Reference::AllenCahn { diffusion: c }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngkit::Purpose;
    use rand::SeedableRng;

    #[test]
    fn benchmark_values() {
        assert_eq!(benchmark_u0(0.0), 1.0);
        assert!((benchmark_u0(1.0) - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        let p = benchmark_1d();
        assert_eq!(p.nonlinear.eval(0.0, &[0.0], 2.0, &[]), -6.0);
        assert_eq!(p.op.advection, vec![1.0]);
        assert_eq!(p.op.diffusion, 1.0);
    }

    #[test]
    fn benchmark_l1_norm() {
        let z0 = InitialData::Benchmark1d.l1_norm();
        assert!((z0 - 1.75 * PI.sqrt()).abs() < 1e-10, "{z0}");
    }

    #[test]
    fn allen_cahn_rejects_low_dimension() {
        assert!(allen_cahn(1).is_err());
        assert!(allen_cahn(2).is_ok());
        assert!(ProblemSpec::by_name("nope", 2).is_err());
        assert!(ProblemSpec::by_name("benchmark1d", 2).is_err());
    }

    #[test]
    fn reference_point_values() {
        let peak = u_ref(&[2.0, 2.0], 0.0, 1.0);
        assert!((peak - 4.0 / PI * (1.0 + 2.0 * (-18.0f64).exp())).abs() < 1e-14);
        assert!((peak - 1.27324).abs() < 1e-5);
        let trough = u_ref(&[-1.0, -1.0], 0.0, 1.0);
        assert!((trough + 2.0 / PI * ((-18.0f64).exp() + 2.0)).abs() < 1e-14);
        assert_eq!(u_ref(&[3.0, -3.0, 0.5], 0.7, 1.0), 0.0);
        assert!(u_ref(&[50.0, 0.0], 0.0, 1.0).abs() < 1e-100);
        assert!(u_ref(&[35.0, 35.0, 0.0, 0.0], 0.0, 1.0).abs() < 1e-100);
    }

    #[test]
    fn reference_width_grows_like_sqrt_a() {
        // log-ratio of the first bump along x3 identifies the Gaussian variance a/2
        for &t in &[0.0, 0.5, 2.0] {
            let a = 1.0 + 4.0 * t;
            let (_, base) = ac_bumps(&[2.0, 2.0, 0.0], t, 1.0);
            let (_, off) = ac_bumps(&[2.0, 2.0, 1.0], t, 1.0);
            assert!(((base[0] / off[0]).ln() - 1.0 / a).abs() < 1e-12);
        }
    }

    fn fd_residual(x: &[f64], t: f64) -> f64 {
        let e = 1e-4;
        let c = 1.0;
        let dt = (u_ref(x, t + e, c) - u_ref(x, t - e, c)) / (2.0 * e);
        let mut lap = 0.0;
        let mut y = x.to_vec();
        let u = u_ref(x, t, c);
        for j in 0..x.len() {
            y[j] = x[j] + e;
            let up = u_ref(&y, t, c);
            y[j] = x[j] - e;
            let dn = u_ref(&y, t, c);
            y[j] = x[j];
            lap += (up - 2.0 * u + dn) / (e * e);
        }
        dt - c * lap - u + u.powi(3)
    }

    #[test]
    fn forcing_matches_finite_difference_residual() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for i in 0..100 {
            let d = [2, 4, 6][i % 3];
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..4.0)).collect();
            let t = rng.random_range(0.05..2.0);
            let r = forcing_r(&x, t, 1.0);
            let fd = fd_residual(&x, t);
            assert!((r - fd).abs() < 1e-6, "x={x:?} t={t}: {r} vs {fd}");
        }
    }

    #[test]
    fn forcing_structure() {
        let x = [1.3, -1.3, 0.2];
        let u = u_ref(&x, 0.4, 1.0);
        assert_eq!(u, 0.0);
        let r = forcing_r(&x, 0.4, 1.0);
        assert!((r - fd_residual(&x, 0.4)).abs() < 1e-6);
        assert!(forcing_r(&[60.0, 60.0], 1.0, 1.0).abs() < 1e-100);
    }

    #[test]
    fn projection_is_dimension_free() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (x1, x2, t) = (rng.random_range(-4.0..5.0), rng.random_range(-4.0..5.0), rng.random_range(0.0..2.0));
            assert_eq!(m_ref(x1, x2, t, 1.0), u_ref(&[x1, x2], t, 1.0));
        }
        assert_eq!(m_ref(1.0, -1.0, 0.3, 1.0), 0.0);
    }

    #[test]
    fn projection_matches_tensor_quadrature_in_4d() {
        // Gauss-Hermite-free check: composite Simpson over (x3, x4) on [-10, 10]²
        let n = 400;
        let hq = 20.0 / n as f64;
        let wts: Vec<f64> = (0..=n)
            .map(|i| {
                (if i == 0 || i == n {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                }) * hq
                    / 3.0
            })
            .collect();
        for &(x1, x2, t) in &[(2.0, 2.0, 0.0), (-1.0, -0.5, 1.0), (0.3, 1.7, 0.5)] {
            let mut sum = 0.0;
            for i in 0..=n {
                for j in 0..=n {
                    let x3 = -10.0 + i as f64 * hq;
                    let x4 = -10.0 + j as f64 * hq;
                    sum += wts[i] * wts[j] * u_ref(&[x1, x2, x3, x4], t, 1.0);
                }
            }
            assert!((sum - m_ref(x1, x2, t, 1.0)).abs() < 1e-8, "{sum} vs {} at {x1},{x2},{t}", m_ref(x1, x2, t, 1.0));
        }
    }

    #[test]
    fn reference_initial_matches_initial_data() {
        let p = allen_cahn(3).unwrap();
        let x = [0.4, 1.1, -0.2];
        assert_eq!(p.initial.eval(&x), p.reference.unwrap().solution(&x, 0.0).unwrap());
    }

    #[test]
    fn allen_cahn_l1_by_grid_quadrature() {
        // 2-D midpoint rule on |M(x1, x2, 0)| as an independent check
        let hq = 0.01;
        let mut z = 0.0;
        let mut neg = 0.0;
        for i in 0..1600 {
            for j in 0..1600 {
                let v = m_ref(-8.0 + (i as f64 + 0.5) * hq, -8.0 + (j as f64 + 0.5) * hq, 0.0, 1.0);
                z += v.abs();
                if v < 0.0 {
                    neg -= v;
                }
            }
        }
        z *= hq * hq;
        neg *= hq * hq;
        let init = InitialData::AllenCahn { dim: 4 };
        assert!((init.l1_norm() - z).abs() < 1e-4 * z, "{} vs {z}", init.l1_norm());
        assert!((init.negative_fraction() - neg / z).abs() < 1e-4);
    }

    #[test]
    fn benchmark_sampler() {
        let n = 200_000;
        let init = InitialData::Benchmark1d;
        let e = init.sample(n, n, StreamSpec::new(1, Purpose::InitSampling, 0), 1 << 14).unwrap();
        let z0 = init.l1_norm();
        assert_eq!(e.count(), n);
        assert!(e.weights().iter().all(|&w| w == z0));
        // second moment of |u0|/Z0 is ∫x² e^{-x²}(1+x⁴) / Z0 = (1/2 + 15/8)√π / Z0
        let m2 = e.iter().map(|(x, _)| x[0] * x[0]).sum::<f64>() / n as f64;
        let exact = (0.5 + 15.0 / 8.0) * PI.sqrt() / z0;
        let m4 = e.iter().map(|(x, _)| x[0].powi(4)).sum::<f64>() / n as f64;
        let se = ((m4 - m2 * m2) / n as f64).sqrt();
        assert!((m2 - exact).abs() < 3.0 * se, "{m2} vs {exact}");
    }

    #[test]
    fn allen_cahn_sampler_sign_fraction() {
        let n = 200_000;
        let init = InitialData::AllenCahn { dim: 2 };
        let e = init.sample(n, n, StreamSpec::new(2, Purpose::InitSampling, 0), 1 << 14).unwrap();
        let z0 = init.l1_norm();
        let neg = e.weights().iter().filter(|&&w| w < 0.0).count() as f64 / n as f64;
        let p = init.negative_fraction();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((neg - p).abs() < 3.0 * se, "{neg} vs {p}");
        assert!(e.weights().iter().all(|w| (w.abs() - z0).abs() < 1e-12));
        // every sample sits on the side of x1 + x2 = 0 matching its sign
        assert!(e.iter().all(|(x, w)| (x[0] + x[1]) * w > 0.0));
    }

    #[test]
    fn sampler_is_chunk_deterministic() {
        let init = InitialData::AllenCahn { dim: 3 };
        let s = StreamSpec::new(5, Purpose::InitSampling, 0);
        assert_eq!(init.sample(5000, 5000, s, 700).unwrap(), init.sample(5000, 5000, s, 700).unwrap());
    }
}
