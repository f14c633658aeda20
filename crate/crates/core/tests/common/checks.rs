//! Checks shared by the integration tests and the acceptance suite.

use num_complex::Complex64;
use psse::solver::baselines::{jacobian, RealParameterization};
use psse::solver::deterministic::linearize;
use psse::solver::stochastic::{minibatch_step, stochastic_step, MiniBatchSchedule, StepScratch};
use psse::MeasurementSet;

/// Applies every batch once as a batch step and once as sequential single
/// steps from the same `v`, and demands bitwise-equal states.
pub fn batches_match_sequential(
    set: &MeasurementSet,
    schedule: &MiniBatchSchedule,
    v: &[Complex64],
    mu: f64,
) -> Result<(), String> {
    let mut scratch = Vec::new();
    let mut single = StepScratch::default();
    for (b, batch) in schedule.batches.iter().enumerate() {
        let mut batched = v.to_vec();
        minibatch_step(set, batch, &mut batched, mu, &mut scratch);
        let mut sequential = v.to_vec();
        for &m in batch {
            stochastic_step(&set.records()[m], &mut sequential, mu, &mut single);
        }
        let mut reversed = v.to_vec();
        for &m in batch.iter().rev() {
            stochastic_step(&set.records()[m], &mut reversed, mu, &mut single);
        }
        for i in 0..v.len() {
            let same = |a: Complex64, b: Complex64| {
                a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
            };
            if !same(batched[i], sequential[i]) || !same(batched[i], reversed[i]) {
                return Err(format!("batch {b} differs at bus {i}"));
            }
        }
    }
    Ok(())
}

/// Largest relative error between the linearized rows and central
/// differences of the scaled residuals along random directions.
pub fn linearize_fd_error(set: &MeasurementSet, v: &[Complex64], delta: &[Complex64], mu: f64) -> f64 {
    let scale = mu / set.m() as f64;
    let lin = linearize(set, v, mu);
    let ad = lin.a.mul_vec(delta);
    let eps = 1e-6;
    let plus: Vec<Complex64> = v.iter().zip(delta).map(|(a, d)| a + d * eps).collect();
    let minus: Vec<Complex64> = v.iter().zip(delta).map(|(a, d)| a - d * eps).collect();
    let mut worst = 0.0f64;
    for (m, rec) in set.records().iter().enumerate() {
        let fd = scale * (rec.residual(&plus) - rec.residual(&minus)) / (2.0 * eps);
        let analytic = -ad[m].re;
        worst = worst.max((fd - analytic).abs() / analytic.abs().max(scale));
    }
    worst
}

/// Largest relative error of the baseline Jacobian against central
/// differences of the measurement functions, column by column.
pub fn jacobian_fd_error(set: &MeasurementSet, param: &RealParameterization, v: &[Complex64]) -> f64 {
    let x = param.from_state(v);
    let state = param.to_state(&x);
    let (_, jac) = jacobian(set, param, &state);
    let eps = 1e-6;
    let values = |x: &[f64]| -> Vec<f64> {
        let s = param.to_state(x);
        set.records().iter().map(|r| r.matrix.evaluate(&s)).collect()
    };
    let mut worst = 0.0f64;
    for col in 0..param.dim() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[col] += eps;
        xm[col] -= eps;
        let (hp, hm) = (values(&xp), values(&xm));
        for row in 0..set.m() {
            let fd = (hp[row] - hm[row]) / (2.0 * eps);
            let j = jac[(row, col)];
            worst = worst.max((fd - j).abs() / j.abs().max(1.0));
        }
    }
    worst
}
