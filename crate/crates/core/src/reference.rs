//! Deterministic 1-D reference solver for `u_t = b u_x + c u_xx + u − u³`.
//!
//! Strang splitting: half a step of the exact reaction flow, a full step of
//! the linear part solved exactly in Fourier space on a periodic box, and
//! another half reaction step.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Exact flow of `u' = u − u³` over time `t`.
pub fn nonlinear_flow(u: f64, t: f64) -> f64 {
    let et = t.exp();
    u * et / (1.0 + u * u * (et * et - 1.0)).sqrt()
}

/// Grid values on `[−L, L)` with `n` points, `x_j = −L + j·2L/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    pub half_width: f64,
    pub values: Vec<f64>,
    pub time: f64,
}

impl SpectralState {
    pub fn new(half_width: f64, values: Vec<f64>) -> Result<Self> {
        if !(half_width > 0.0) {
            return Err(Error::config("domain half-width must be positive"));
        }
        if !values.len().is_power_of_two() || values.len() < 4 {
            return Err(Error::config(format!("mode count {} is not a power of two >= 4", values.len())));
        }
        Ok(Self { half_width, values, time: 0.0 })
    }

    /// Sample `u0` on the grid.
    pub fn from_fn<F: Fn(f64) -> f64>(half_width: f64, n_modes: usize, u0: F) -> Result<Self> {
        let dx = 2.0 * half_width / n_modes as f64;
        Self::new(half_width, (0..n_modes).map(|j| u0(-half_width + j as f64 * dx)).collect())
    }

    pub fn n_modes(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_modes() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    /// Linear interpolation; 0 outside the domain.
    pub fn interpolate(&self, x: f64) -> f64 {
        let s = (x + self.half_width) / self.dx();
        if !(s >= 0.0) || s > (self.n_modes() - 1) as f64 {
            return 0.0;
        }
        let j = (s.floor() as usize).min(self.n_modes() - 2);
        let frac = s - j as f64;
        self.values[j] * (1.0 - frac) + self.values[j + 1] * frac
    }

    /// Largest magnitude within `n/64` points of either edge, relative to the maximum.
    pub fn edge_ratio(&self) -> f64 {
        let n = self.n_modes();
        let band = (n / 64).max(1);
        let max = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return 0.0;
        }
        let edge = self.values[..band].iter().chain(&self.values[n - band..]).fold(0.0f64, |m, v| m.max(v.abs()));
        edge / max
    }

    /// Check that the solution is negligible at the periodic boundary.
    pub fn boundary_check(&self, limit: f64) -> Result<()> {
        let edge = self.edge_ratio();
        if edge > limit {
            return Err(Error::BoundaryContamination { edge, limit });
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.dx()).sqrt()
    }
}

/// Fourier-space propagator of the linear part `b ∂_x + c ∂_xx`.
pub struct LinearPropagator {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    symbol: Vec<Complex64>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl LinearPropagator {
    pub fn new(half_width: f64, n_modes: usize, advection: f64, diffusion: f64, tau: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_modes);
        let inverse = planner.plan_fft_inverse(n_modes);
        let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
        let symbol = (0..n_modes)
            .map(|m| {
                let k = wavenumber(m, n_modes, half_width);
                // mode e^{ikx} evolves by exp(τ(ibk − ck²))
                let decay = (-diffusion * k * k * tau).exp();
                let phase = advection * k * tau;
                if 2 * m == n_modes {
                    // the Nyquist mode is real on the grid
                    Complex64::new(decay * phase.cos(), 0.0)
                } else {
                    Complex64::from_polar(decay, phase)
                }
            })
            .collect();
        Self {
            forward,
            inverse,
            symbol,
            buffer: vec![Complex64::default(); n_modes],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    pub fn apply(&mut self, values: &mut [f64]) {
        let n = values.len();
        for (b, &v) in self.buffer.iter_mut().zip(values.iter()) {
            *b = Complex64::new(v, 0.0);
        }
        self.forward.process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (b, s) in self.buffer.iter_mut().zip(&self.symbol) {
            *b *= s;
        }
        self.inverse.process_with_scratch(&mut self.buffer, &mut self.scratch);
        let inv_n = 1.0 / n as f64;
        for (v, b) in values.iter_mut().zip(&self.buffer) {
            *v = b.re * inv_n;
        }
    }
}

fn wavenumber(m: usize, n: usize, half_width: f64) -> f64 {
    let base = PI / half_width;
    if m <= n / 2 {
        m as f64 * base
    } else {
        -((n - m) as f64) * base
    }
}

/// One linear step with a fresh propagator.
pub fn linear_step(state: &mut SpectralState, advection: f64, diffusion: f64, tau: f64) {
    if tau == 0.0 {
        return;
    }
    let mut prop = LinearPropagator::new(state.half_width, state.n_modes(), advection, diffusion, tau);
    prop.apply(&mut state.values);
    state.time += tau;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceConfig {
    pub half_width: f64,
    pub n_modes: usize,
    pub tau: f64,
    pub advection: f64,
    pub diffusion: f64,
    /// Include the `u − u³` reaction sub-flow.
    pub reaction: bool,
}

impl ReferenceConfig {
    /// Settings for the 1-D benchmark up to `T = 10`.
    pub fn benchmark() -> Self {
        Self { half_width: 80.0, n_modes: 1 << 14, tau: 1e-3, advection: 1.0, diffusion: 1.0, reaction: true }
    }
}

/// Run `steps(T/τ)` Strang steps, recording snapshots at `report_times`.
pub fn strang_run<F: Fn(f64) -> f64>(
    config: &ReferenceConfig,
    u0: F,
    final_time: f64,
    report_times: &[f64],
) -> Result<ReferenceSolution> {
    let tau = config.tau;
    let steps = (final_time / tau).round();
    if !(tau > 0.0) || steps < 1.0 || (steps * tau - final_time).abs() > 1e-9 * final_time.max(1.0) {
        return Err(Error::config(format!("T = {final_time} is not a positive multiple of tau = {tau}")));
    }
    let steps = steps as usize;
    let mut report_steps: Vec<(usize, f64)> =
        report_times.iter().map(|&t| ((t / tau).round() as usize, t)).filter(|&(s, _)| s <= steps).collect();
    report_steps.sort_by_key(|&(s, _)| s);
    report_steps.dedup_by_key(|(s, _)| *s);

    let mut state = SpectralState::from_fn(config.half_width, config.n_modes, u0)?;
    let mut prop = LinearPropagator::new(config.half_width, config.n_modes, config.advection, config.diffusion, tau);
    let mut snapshots = Vec::new();
    let mut next = report_steps.iter().peekable();
    while let Some(&&(0, t)) = next.peek() {
        snapshots.push((t, state.values.clone()));
        next.next();
    }
    for step in 1..=steps {
        strang_step(&mut state, &mut prop, tau, config.reaction);
        while let Some(&&(s, t)) = next.peek() {
            if s != step {
                break;
            }
            snapshots.push((t, state.values.clone()));
            next.next();
        }
    }
    state.time = final_time;
    Ok(ReferenceSolution { config: config.clone(), final_state: state, snapshots })
}

fn strang_step(state: &mut SpectralState, prop: &mut LinearPropagator, tau: f64, reaction: bool) {
    if reaction {
        half_reaction(&mut state.values, tau);
    }
    prop.apply(&mut state.values);
    if reaction {
        half_reaction(&mut state.values, tau);
    }
    state.time += tau;
}

fn half_reaction(values: &mut [f64], tau: f64) {
    let et = (0.5 * tau).exp();
    let grow = et * et - 1.0;
    for u in values.iter_mut() {
        *u = *u * et / (1.0 + *u * *u * grow).sqrt();
    }
}

/// Snapshots of the reference solution at the requested times.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub config: ReferenceConfig,
    pub final_state: SpectralState,
    pub snapshots: Vec<(f64, Vec<f64>)>,
}

impl ReferenceSolution {
    pub fn snapshot(&self, t: f64) -> Option<SpectralState> {
        self.snapshots.iter().find(|(s, _)| (s - t).abs() < 1e-9).map(|(s, v)| SpectralState {
            half_width: self.config.half_width,
            values: v.clone(),
            time: *s,
        })
    }

    /// `u_ref(x, t)` by linear interpolation, `None` if `t` was not recorded.
    pub fn eval(&self, x: f64, t: f64) -> Option<f64> {
        let (_, v) = self.snapshots.iter().find(|(s, _)| (s - t).abs() < 1e-9)?;
        let n = v.len();
        let dx = 2.0 * self.config.half_width / n as f64;
        let s = (x + self.config.half_width) / dx;
        if !(s >= 0.0) || s > (n - 1) as f64 {
            return Some(0.0);
        }
        let j = (s.floor() as usize).min(n - 2);
        let frac = s - j as f64;
        Some(v[j] * (1.0 - frac) + v[j + 1] * frac)
    }

    /// Worst edge ratio over all snapshots.
    pub fn edge_ratio(&self) -> f64 {
        self.snapshots
            .iter()
            .map(|(s, v)| {
                SpectralState { half_width: self.config.half_width, values: v.clone(), time: *s }.edge_ratio()
            })
            .fold(self.final_state.edge_ratio(), f64::max)
    }

    /// CSV rows `time,x,u` for every snapshot.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time,x,u")?;
        let dx = 2.0 * self.config.half_width / self.config.n_modes as f64;
        for (t, v) in &self.snapshots {
            for (j, u) in v.iter().enumerate() {
                writeln!(out, "{t},{},{u:e}", -self.config.half_width + j as f64 * dx)?;
            }
        }
        Ok(())
    }
}

/// Relative discrete L² distance between two states on the same grid.
pub fn relative_distance(a: &SpectralState, b: &SpectralState) -> f64 {
    let num: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.values.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Orders `log2(e1/e2)` from runs at `tau`, `tau/2`, `tau/4` (pairwise differences).
pub fn self_convergence_order<F: Fn(f64) -> f64 + Copy>(
    config: &ReferenceConfig,
    u0: F,
    final_time: f64,
) -> Result<f64> {
    let runs: Vec<SpectralState> = [1.0, 0.5, 0.25]
        .iter()
        .map(|s| {
            let cfg = ReferenceConfig { tau: config.tau * s, ..config.clone() };
            strang_run(&cfg, u0, final_time, &[]).map(|r| r.final_state)
        })
        .collect::<Result<_>>()?;
    let e1 = relative_distance(&runs[0], &runs[1]);
    let e2 = relative_distance(&runs[1], &runs[2]);
    Ok((e1 / e2).log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::benchmark_u0;

    fn rk4(mut u: f64, t: f64, steps: usize) -> f64 {
        let h = t / steps as f64;
        let f = |u: f64| u - u * u * u;
        for _ in 0..steps {
            let k1 = f(u);
            let k2 = f(u + 0.5 * h * k1);
            let k3 = f(u + 0.5 * h * k2);
            let k4 = f(u + h * k3);
            u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        u
    }

    #[test]
    fn nonlinear_flow_fixed_points_and_rk4() {
        for &t in &[0.0, 0.3, 5.0] {
            assert_eq!(nonlinear_flow(0.0, t), 0.0);
            assert!((nonlinear_flow(1.0, t) - 1.0).abs() < 1e-15);
        }
        let v = nonlinear_flow(0.5, 0.1);
        assert!((v - 0.53786).abs() < 1e-4, "{v}");
        for &(u, t) in &[(0.5, 0.1), (-0.3, 1.0), (2.5, 0.4), (1e-3, 3.0)] {
            assert!((nonlinear_flow(u, t) - rk4(u, t, 10_000)).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let mut s = SpectralState::from_fn(10.0, 256, |x| (-x * x).exp()).unwrap();
        let orig = s.clone();
        linear_step(&mut s, 1.0, 1.0, 0.0);
        assert_eq!(s, orig);
    }

    #[test]
    fn single_mode_scaled_by_symbol() {
        let l = 10.0;
        let n = 128;
        let m = 5;
        let k = m as f64 * PI / l;
        let mut s = SpectralState::from_fn(l, n, |x| (k * x).cos()).unwrap();
        let tau = 0.3;
        linear_step(&mut s, 0.7, 0.2, tau);
        for j in 0..n {
            let x = s.x(j);
            let expect = (-0.2 * k * k * tau).exp() * (k * (x + 0.7 * tau)).cos();
            assert!((s.values[j] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn advection_translates_left() {
        let mut s = SpectralState::from_fn(20.0, 1024, |x| (-x * x).exp()).unwrap();
        linear_step(&mut s, 1.0, 0.0, 0.5);
        for j in 0..s.n_modes() {
            let x = s.x(j);
            assert!((s.values[j] - (-(x + 0.5).powi(2)).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn diffusion_second_moment_grows_by_two_tau() {
        let moment = |s: &SpectralState| {
            let m0: f64 = s.values.iter().sum();
            let m2: f64 = (0..s.n_modes()).map(|j| s.x(j).powi(2) * s.values[j]).sum();
            m2 / m0
        };
        let mut s = SpectralState::from_fn(30.0, 2048, |x| (-x * x).exp()).unwrap();
        let before = moment(&s);
        linear_step(&mut s, 0.0, 1.0, 0.4);
        assert!((moment(&s) - before - 0.8).abs() < 1e-9);
    }

    #[test]
    fn heat_advection_closed_form() {
        let cfg = ReferenceConfig {
            half_width: 40.0,
            n_modes: 2048,
            tau: 0.1,
            advection: 1.0,
            diffusion: 1.0,
            reaction: false,
        };
        let r = strang_run(&cfg, |x| (-x * x).exp(), 2.0, &[2.0]).unwrap();
        let s = r.snapshot(2.0).unwrap();
        let a = 1.0 + 4.0 * 2.0;
        for j in 0..s.n_modes() {
            let x = s.x(j);
            let exact = (-(x + 2.0).powi(2) / a).exp() / a.sqrt();
            assert!((s.values[j] - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn one_step_run_is_one_strang_triple() {
        let cfg = ReferenceConfig {
            half_width: 20.0,
            n_modes: 512,
            tau: 0.2,
            advection: 1.0,
            diffusion: 1.0,
            reaction: true,
        };
        let r = strang_run(&cfg, benchmark_u0, 0.2, &[]).unwrap();
        let mut s = SpectralState::from_fn(20.0, 512, benchmark_u0).unwrap();
        s.values.iter_mut().for_each(|u| *u = nonlinear_flow(*u, 0.1));
        linear_step(&mut s, 1.0, 1.0, 0.2);
        s.values.iter_mut().for_each(|u| *u = nonlinear_flow(*u, 0.1));
        for (a, b) in r.final_state.values.iter().zip(&s.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn second_order_self_convergence() {
        let cfg = ReferenceConfig {
            half_width: 40.0,
            n_modes: 4096,
            tau: 0.1,
            advection: 1.0,
            diffusion: 1.0,
            reaction: true,
        };
        let order = self_convergence_order(&cfg, benchmark_u0, 1.0).unwrap();
        assert!((order - 2.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SpectralState::new(1.0, vec![0.0; 100]).is_err());
        assert!(SpectralState::new(0.0, vec![0.0; 128]).is_err());
        let cfg = ReferenceConfig::benchmark();
        assert!(strang_run(&cfg, benchmark_u0, 0.0015, &[]).is_err());
    }

    #[test]
    fn small_domain_fails_boundary_check() {
        let cfg = ReferenceConfig {
            half_width: 4.0,
            n_modes: 256,
            tau: 0.01,
            advection: 1.0,
            diffusion: 1.0,
            reaction: true,
        };
        let r = strang_run(&cfg, benchmark_u0, 1.0, &[1.0]).unwrap();
        assert!(r.final_state.boundary_check(1e-10).is_err());
    }

    #[test]
    fn interpolation_and_lookup() {
        let cfg = ReferenceConfig {
            half_width: 10.0,
            n_modes: 256,
            tau: 0.5,
            advection: 0.0,
            diffusion: 0.0,
            reaction: false,
        };
        let r = strang_run(&cfg, |x| x, 1.0, &[0.5, 1.0]).unwrap();
        assert!((r.eval(1.23, 1.0).unwrap() - 1.23).abs() < 1e-12);
        assert_eq!(r.eval(1.0, 0.7), None);
        assert_eq!(r.eval(50.0, 0.5), Some(0.0));
    }
}
