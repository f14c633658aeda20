use std::io::Write;

use serde::{Deserialize, Serialize};

/// One sample of a solver run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Outer iteration (deterministic, baselines) or epoch (stochastic).
    pub iter: usize,
    /// LAV objective on the set the solver was given.
    pub objective: f64,
    /// Normalized RMSE against the truth, when one was supplied.
    pub rmse: Option<f64>,
    /// Wall-clock seconds since the solver started.
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub fn push(&mut self, row: TraceRow) {
        if let Some(last) = self.rows.last() {
            assert!(row.iter > last.iter, "trace indices must increase");
        }
        self.rows.push(row);
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    /// Index of the last recorded iteration (0 when only the start was logged).
    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    /// First iteration whose RMSE is at or below `threshold`.
    pub fn first_reaching(&self, threshold: f64) -> Option<usize> {
        self.rows
            .iter()
            .find(|r| r.rmse.is_some_and(|e| e <= threshold))
            .map(|r| r.iter)
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    /// CSV with the fixed header `iter,objective,rmse,seconds`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iter,objective,rmse,seconds")?;
        for r in &self.rows {
            let rmse = r.rmse.map(|e| format!("{e:e}")).unwrap_or_default();
            writeln!(out, "{},{:e},{},{:.6}", r.iter, r.objective, rmse, r.seconds)?;
        }
        Ok(())
    }
}
