//! LAV solvers and least-squares baselines.

use std::time::Instant;

use num_complex::Complex64;

use crate::measurement::MeasurementSet;
use crate::metrics::Truth;
use crate::state::VoltageState;
use crate::trace::{ConvergenceTrace, TraceRow};

pub mod baselines;
pub mod deterministic;
pub mod stochastic;

/// Final iterate and per-iteration history of one solver run.
#[derive(Clone, Debug)]
pub struct Solution {
    pub state: VoltageState,
    pub trace: ConvergenceTrace,
    /// True when the step tolerance stopped the run before the iteration cap.
    pub converged: bool,
}

/// Appends trace rows with wall time measured from construction.
pub(crate) struct Recorder<'a> {
    start: Instant,
    set: &'a MeasurementSet,
    truth: Option<&'a Truth>,
    trace: ConvergenceTrace,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(set: &'a MeasurementSet, truth: Option<&'a Truth>) -> Self {
        Self {
            start: Instant::now(),
            set,
            truth,
            trace: ConvergenceTrace::default(),
        }
    }

    pub(crate) fn record(&mut self, iter: usize, v: &[Complex64]) {
        let row = TraceRow {
            iter,
            objective: self.set.lav_objective(v),
            rmse: self.truth.map(|t| t.rmse(v)),
            seconds: self.start.elapsed().as_secs_f64(),
        };
        self.trace.push(row);
    }

    pub(crate) fn finish(self, state: VoltageState, converged: bool) -> Solution {
        Solution {
            state,
            trace: self.trace,
            converged,
        }
    }
}

pub(crate) fn check_dimension(set: &MeasurementSet, v0: &[Complex64]) -> crate::Result<()> {
    if v0.len() != set.n() {
        return Err(crate::PsseError::Dimension {
            expected: set.n(),
            actual: v0.len(),
        });
    }
    Ok(())
}
