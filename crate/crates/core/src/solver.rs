//! The time loop.
//!
//! One birth-death step, in order:
//! 1. if `N(t_m) > n_a N(0)`, resample `N(0)` particles from `|Ū_m|`;
//! 2. draw `N_birth` newborns from `|τ f(t_m, ·, Ū_m)|` and append them;
//! 3. move every particle by `e^{τL*}`;
//! 4. rebuild the grid `Ū_{m+1}` and the field `f(t_{m+1}, ·, Ū_{m+1})`.
//!
//! Baseline SPM replaces 1–2 by a full resample from `|Ū_m + τ f|`.

use std::io::{self, Write};
use std::time::Instant;

use crate::birth_death::{annihilate, birth_budget, sample_births, spm_full_resample};
use crate::dynamics::apply_semigroup;
use crate::error::{Error, Result};
use crate::metrics::{project_2d, relative_l2_1d, relative_l2_projection, ProjectionBounds, ProjectionGrid};
use crate::particles::Ensemble;
use crate::problems::ProblemSpec;
use crate::rngkit::{Purpose, StreamSpec};
use crate::vug::{deposit_chunked, tabulate_field, FieldGrid, SparseGrid};
use crate::DEFAULT_CHUNK_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    BirthDeath,
    BaselineSpm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::BirthDeath => "birth-death",
            Method::BaselineSpm => "spm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "birth-death" | "birth_death" | "bd" => Ok(Method::BirthDeath),
            "spm" | "baseline" | "baseline_spm" => Ok(Method::BaselineSpm),
            other => Err(Error::config(format!("unknown method '{other}' (expected birth-death or spm)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tau: f64,
    pub h: f64,
    pub final_time: f64,
    pub n0: usize,
    /// Growth threshold `n_a > 1`.
    pub n_a: f64,
    pub seed: u64,
    pub method: Method,
    pub report_times: Vec<f64>,
    pub chunk_size: usize,
    /// Window of the 1-D audit grid.
    pub audit_window: (f64, f64),
    pub projection_bounds: ProjectionBounds,
}

/// Default 1-D audit window; covers the benchmark solution at `T = 10`.
pub const DEFAULT_AUDIT_WINDOW: (f64, f64) = (-50.0, 30.0);

impl SolverConfig {
    /// Config with `n_a = 3`, reports every 10 steps and at `T`.
    pub fn new(tau: f64, h: f64, final_time: f64, n0: usize, seed: u64) -> Self {
        let mut cfg = Self {
            tau,
            h,
            final_time,
            n0,
            n_a: 3.0,
            seed,
            method: Method::BirthDeath,
            report_times: Vec::new(),
            chunk_size: DEFAULT_CHUNK_SIZE,
            audit_window: DEFAULT_AUDIT_WINDOW,
            projection_bounds: ProjectionBounds::default(),
        };
        cfg.report_times = cfg.default_report_times();
        cfg
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_n_a(mut self, n_a: f64) -> Self {
        self.n_a = n_a;
        self
    }

    pub fn with_report_times(mut self, times: Vec<f64>) -> Self {
        self.report_times = times;
        self
    }

    pub fn default_report_times(&self) -> Vec<f64> {
        let steps = (self.final_time / self.tau).round() as usize;
        let mut times: Vec<f64> = (1..=steps).filter(|s| s % 10 == 0).map(|s| s as f64 * self.tau).collect();
        if !steps.is_multiple_of(10) {
            times.push(self.final_time);
        }
        times
    }

    pub fn steps(&self) -> usize {
        (self.final_time / self.tau).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::config(format!("h must be positive, got {}", self.h)));
        }
        let ratio = self.final_time / self.tau;
        if !(ratio >= 0.5) || (ratio - ratio.round()).abs() > 1e-9 * ratio.round().max(1.0) {
            return Err(Error::config(format!(
                "T/tau must be a positive integer, got {} / {}",
                self.final_time, self.tau
            )));
        }
        if self.n0 == 0 {
            return Err(Error::config("N(0) must be positive"));
        }
        if !(self.n_a > 1.0) {
            return Err(Error::config(format!("n_a must exceed 1, got {}", self.n_a)));
        }
        if self.chunk_size == 0 {
            return Err(Error::config("chunk size must be positive"));
        }
        Ok(())
    }

    fn report_steps(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.report_times.iter().map(|t| (t / self.tau).round() as usize).collect();
        s.sort_unstable();
        s.dedup();
        s
    }
}

/// Observables recorded after each step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRow {
    pub step: usize,
    /// `t_{m+1}`.
    pub time: f64,
    /// `N(t_{m+1})`.
    pub particle_count: usize,
    /// `N(t_m)` entering the step.
    pub count_before: usize,
    /// Count right after the annihilation check (`N(0)` if it fired).
    pub count_after_annihilation: usize,
    pub births: usize,
    pub annihilated: bool,
    pub signed_mass: f64,
    pub l1_mass: f64,
    pub wall_ms: f64,
}

impl StepRow {
    pub const CSV_HEADER: &'static str =
        "step,time,particle_count,count_before,count_after_annihilation,births,annihilated,signed_mass,l1_mass,wall_ms";

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{:e},{:e},{:.3}",
            self.step,
            self.time,
            self.particle_count,
            self.count_before,
            self.count_after_annihilation,
            self.births,
            u8::from(self.annihilated),
            self.signed_mass,
            self.l1_mass,
            self.wall_ms
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub rows: Vec<StepRow>,
    /// `(time, relative L² error)` at the report times where a reference exists.
    pub errors: Vec<(f64, f64)>,
    pub final_grid: SparseGrid,
    /// Final projection for `d ≥ 2`.
    pub final_projection: Option<ProjectionGrid>,
    pub final_count: usize,
}

impl RunRecord {
    pub fn final_error(&self) -> Option<f64> {
        let t_end = self.rows.last()?.time;
        self.errors.iter().find(|(t, _)| (t - t_end).abs() < 1e-9).map(|&(_, e)| e)
    }

    /// Solver-loop wall time in milliseconds.
    pub fn wall_ms(&self) -> f64 {
        self.rows.iter().map(|r| r.wall_ms).sum()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{},error", StepRow::CSV_HEADER)?;
        for row in &self.rows {
            let mut line = Vec::new();
            row.write_csv(&mut line)?;
            let line = String::from_utf8_lossy(&line);
            let err = self
                .errors
                .iter()
                .find(|(t, _)| (t - row.time).abs() < 1e-9)
                .map(|(_, e)| format!("{e:e}"))
                .unwrap_or_default();
            writeln!(out, "{},{err}", line.trim_end())?;
        }
        Ok(())
    }
}

pub struct Solver {
    problem: ProblemSpec,
    config: SolverConfig,
    ensemble: Ensemble,
    grid: SparseGrid,
    field: FieldGrid,
    step_index: usize,
}

impl Solver {
    /// Sample `N(0)` particles from `|u0| / Z0` and build the grids at `t = 0`.
    pub fn init(problem: ProblemSpec, config: SolverConfig) -> Result<Self> {
        problem.validate()?;
        config.validate()?;
        let streams = StreamSpec::new(config.seed, Purpose::InitSampling, 0);
        let ensemble = problem.initial.sample(config.n0, config.n0, streams, config.chunk_size)?;
        let (grid, field) = build_grids(&problem, &config, &ensemble, 0.0, 0)?;
        Ok(Self { problem, config, ensemble, grid, field, step_index: 0 })
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn grid(&self) -> &SparseGrid {
        &self.grid
    }

    pub fn field(&self) -> &FieldGrid {
        &self.field
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn time(&self) -> f64 {
        self.ensemble.time
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    /// Advance one step of size `τ`.
    pub fn step(&mut self) -> Result<StepRow> {
        let start = Instant::now();
        let cfg = &self.config;
        let m = self.step_index as u64;
        let n0 = cfg.n0;
        let t = self.ensemble.time;
        let count_before = self.ensemble.count();
        let mut annihilated = false;
        let mut births = 0;

        match cfg.method {
            Method::BirthDeath => {
                if count_before as f64 > cfg.n_a * n0 as f64 {
                    self.ensemble.clear();
                    let streams = StreamSpec::new(cfg.seed, Purpose::Annihilation, m);
                    self.ensemble = annihilate(&self.grid, n0, streams, cfg.chunk_size)?;
                    self.ensemble.time = t;
                    annihilated = true;
                }
                let count_after_annihilation = self.ensemble.count();
                let mut rng = StreamSpec::new(cfg.seed, Purpose::BirthCount, m).stream();
                let budget = birth_budget(&self.field, n0, cfg.tau, &mut rng);
                births = budget.realized_births;
                let streams = StreamSpec::new(cfg.seed, Purpose::Births, m);
                let mut born = sample_births(&self.field, births, n0, streams, cfg.chunk_size)?;
                self.ensemble.append(&mut born)?;
                self.finish_step(start, count_before, count_after_annihilation, births, annihilated)
            }
            Method::BaselineSpm => {
                let streams = StreamSpec::new(cfg.seed, Purpose::FullResample, m);
                self.ensemble.clear();
                self.ensemble = spm_full_resample(&self.grid, &self.field, n0, cfg.tau, streams, cfg.chunk_size)?;
                self.ensemble.time = t;
                let after = self.ensemble.count();
                self.finish_step(start, count_before, after, births, annihilated)
            }
        }
    }

    fn finish_step(
        &mut self,
        start: Instant,
        count_before: usize,
        count_after_annihilation: usize,
        births: usize,
        annihilated: bool,
    ) -> Result<StepRow> {
        let cfg = &self.config;
        let m = self.step_index;
        let streams = StreamSpec::new(cfg.seed, Purpose::Diffusion, m as u64);
        apply_semigroup(&mut self.ensemble, &self.problem.op, cfg.tau, streams, cfg.chunk_size)?;
        // snap accumulated time to the step lattice
        let t_next = (m + 1) as f64 * cfg.tau;
        self.ensemble.time = t_next;
        let (grid, field) = build_grids(&self.problem, cfg, &self.ensemble, t_next, m)?;
        self.grid = grid;
        self.field = field;
        self.step_index += 1;
        Ok(StepRow {
            step: m,
            time: t_next,
            particle_count: self.ensemble.count(),
            count_before,
            count_after_annihilation,
            births,
            annihilated,
            signed_mass: self.ensemble.signed_mass(),
            l1_mass: self.grid.l1_mass(),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Relative L² error against the problem reference at the current time:
    /// VUG reconstruction in 1-D, 2-D projection otherwise.
    pub fn current_error(&self) -> Option<Result<f64>> {
        let reference = self.problem.reference.as_ref()?;
        let t = self.time();
        if !reference.has_time(t) {
            return None;
        }
        if self.problem.dim == 1 {
            Some(relative_l2_1d(&self.grid, |x| reference.solution(&[x], t).unwrap_or(0.0), self.config.audit_window))
        } else {
            reference.projection(0.0, 0.0, t)?;
            Some(
                self.projection()
                    .and_then(|p| relative_l2_projection(&p, |x1, x2| reference.projection(x1, x2, t).unwrap_or(0.0))),
            )
        }
    }

    /// 2-D projection of the current ensemble on the configured bounds with cell side `h`.
    pub fn projection(&self) -> Result<ProjectionGrid> {
        project_2d(&self.ensemble, self.config.h, self.config.projection_bounds)
    }

    /// Run all `T/τ` steps.
    pub fn run(problem: ProblemSpec, config: SolverConfig) -> Result<RunRecord> {
        let mut solver = Solver::init(problem, config)?;
        solver.run_to_end()
    }

    pub fn run_to_end(&mut self) -> Result<RunRecord> {
        let report_steps = self.config.report_steps();
        let mut rows = Vec::with_capacity(self.config.steps());
        let mut errors = Vec::new();
        while self.step_index < self.config.steps() {
            rows.push(self.step()?);
            if report_steps.binary_search(&self.step_index).is_ok() {
                if let Some(err) = self.current_error() {
                    errors.push((self.time(), err?));
                }
            }
        }
        let final_projection = if self.problem.dim >= 2 { Some(self.projection()?) } else { None };
        Ok(RunRecord {
            rows,
            errors,
            final_grid: self.grid.clone(),
            final_projection,
            final_count: self.ensemble.count(),
        })
    }
}

fn build_grids(
    problem: &ProblemSpec,
    config: &SolverConfig,
    ensemble: &Ensemble,
    t: f64,
    step: usize,
) -> Result<(SparseGrid, FieldGrid)> {
    let grid = deposit_chunked(ensemble, config.h, config.chunk_size)?;
    if let Some((k, w)) = grid.iter().find(|(_, w)| !w.is_finite()) {
        return Err(Error::NumericalBlowup { step, detail: format!("cell {k} holds weight {w}") });
    }
    let field = tabulate_field(&grid, &problem.nonlinear, t).map_err(|e| match e {
        Error::NonFiniteField(detail) => Error::NumericalBlowup { step, detail },
        other => other,
    })?;
    Ok((grid, field))
}
