//! Stochastic particle method with birth-death dynamics.
//!
//! A semilinear problem `u_t = L u + f(t, x, u, ∇u)` is advanced with the
//! Lawson-Euler step `U_{m+1} = e^{τL}(U_m + τ f)` in weak form. The solution
//! is carried by a cloud of signed, weighted particles. Each step the existing
//! cloud is kept, a small number of particles is born from the nonlinear
//! increment `τ f`, and every particle is moved by the adjoint semigroup
//! `e^{τL*}`. When the population exceeds `n_a · N(0)` it is annihilated by
//! resampling `N(0)` particles from the piecewise-constant reconstruction on
//! a sparse "virtual uniform grid".
//!
//! Module map:
//!
//! * [`particles`]: particles, ensembles and the weak sum.
//! * [`vug`]: sparse cell deposit, reconstruction, gradients, field tabulation.
//! * [`dynamics`]: advection and Brownian diffusion of the cloud.
//! * [`birth_death`]: birth budget, birth sampling, annihilation, baseline SPM resampling.
//! * [`solver`]: the time loop and run records.
//! * [`problems`]: the 1-D benchmark and the d-D Allen-Cahn problem.
//! * [`reference`]: Strang-split spectral reference solver for the 1-D benchmark.
//! * [`metrics`]: relative L² errors, 2-D projections and convergence orders.
//! * [`rngkit`]: counter-based splittable random streams.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod birth_death;
pub mod dynamics;
pub mod error;
pub mod metrics;
pub mod particles;
pub mod problems;
pub mod quadrature;
pub mod reference;
pub mod rngkit;
pub mod solver;
pub mod vug;

pub use birth_death::{annihilate, birth_budget, sample_births, spm_full_resample, BirthBudget};
pub use dynamics::{advect, apply_semigroup, diffuse, LinearOperator};
pub use error::{Error, Result};
pub use metrics::{
    convergence_order, project_2d, relative_l2_1d, relative_l2_projection, OrderDirection, ProjectionBounds,
    ProjectionGrid,
};
pub use particles::{Ensemble, Particle};
pub use problems::{
    allen_cahn, benchmark_1d, benchmark_1d_with_reference, InitialData, NonlinearTerm, ProblemSpec, Reference,
};
pub use reference::{ReferenceConfig, ReferenceSolution, SpectralState};
pub use rngkit::{Purpose, Stream, StreamSpec};
pub use solver::{Method, RunRecord, Solver, SolverConfig, StepRow};
pub use vug::{deposit, deposit_chunked, tabulate_field, CellIndex, FieldGrid, SparseGrid};

/// Number of particles handled by one worker chunk (and one random stream).
pub const DEFAULT_CHUNK_SIZE: usize = 1 << 16;
