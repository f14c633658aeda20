//! Robust power system state estimation.
//!
//! Complex bus voltages are recovered from SCADA measurements by minimizing
//! the least-absolute-value (LAV) loss `f(v) = (1/M) Σ |v^H H_m v − z_m|`.
//! Two composite-optimization solvers are provided:
//!
//! * [`solver::deterministic`]: prox-linear outer loop whose convex
//!   subproblems are solved by ADMM with closed-form updates.
//! * [`solver::stochastic`]: stochastic prox-linear iterations that touch only
//!   the support of one measurement (or a disjoint-support mini-batch).
//!
//! Weighted least squares Gauss-Newton and IRLS are included as baselines,
//! and [`harness`] drives reproducible experiments from JSON configs.

// Validation writes `!(x >= 0.0)` on purpose: the negation also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grid;
pub mod harness;
pub mod measurement;
pub mod metrics;
pub mod prox;
pub mod rng;
pub mod solver;
pub mod state;
pub mod trace;

pub use error::{PsseError, Result};
pub use grid::{
    build_admittance, measurement_matrix, parse_case, AdmittanceModel, MeasurementKind,
    MeasurementMatrix, NetworkCase,
};
pub use measurement::{CorruptionModel, CorruptionSpec, MeasurementSet, NoiseSpec, Record};
pub use state::VoltageState;
pub use trace::{ConvergenceTrace, TraceRow};

pub use num_complex::Complex64;
