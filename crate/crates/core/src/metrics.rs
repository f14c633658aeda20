//! Accuracy metrics and ground-truth generation.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{PsseError, Result};
use crate::grid::NetworkCase;
use crate::measurement::MeasurementSet;
use crate::rng;
use crate::state::VoltageState;

/// Ground truth for RMSE reporting.
#[derive(Clone, Debug, PartialEq)]
pub struct Truth {
    pub state: VoltageState,
    pub reference_bus: usize,
}

impl Truth {
    pub fn new(state: VoltageState, reference_bus: usize) -> Self {
        Self {
            state,
            reference_bus,
        }
    }

    pub fn rmse(&self, estimate: &[Complex64]) -> f64 {
        rmse(estimate, &self.state, self.reference_bus).unwrap_or(f64::NAN)
    }
}

/// Rotation that moves `v[reference]` onto the positive real axis.
fn alignment(v: &[Complex64], reference: usize) -> Complex64 {
    let r = v[reference];
    if r.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        r.conj() / r.norm()
    }
}

/// Normalized RMSE `‖v̂ − v‖/‖v‖` after rotating both vectors so the
/// reference bus has zero phase.
pub fn rmse(estimate: &[Complex64], truth: &[Complex64], reference_bus: usize) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(PsseError::Dimension {
            expected: truth.len(),
            actual: estimate.len(),
        });
    }
    if reference_bus >= truth.len() {
        return Err(PsseError::InvalidParameter(format!(
            "reference bus {reference_bus} out of range"
        )));
    }
    let truth_norm = crate::state::norm(truth);
    if truth_norm == 0.0 {
        return Err(PsseError::InvalidParameter("truth vector is zero".into()));
    }
    let re = alignment(estimate, reference_bus);
    let rt = alignment(truth, reference_bus);
    let diff: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(e, t)| (e * re - t * rt).norm_sqr())
        .sum();
    Ok(diff.sqrt() / truth_norm)
}

/// Mean absolute residual `(1/M) Σ |v^H H_m v − z_m|`.
pub fn lav_objective(set: &MeasurementSet, v: &[Complex64]) -> f64 {
    set.lav_objective(v)
}

/// Independent uniform magnitudes and angles per bus; the reference angle is 0.
pub fn random_truth(
    case: &NetworkCase,
    magnitude: (f64, f64),
    angle: (f64, f64),
    seed: u64,
) -> Result<VoltageState> {
    for (name, (lo, hi)) in [("magnitude", magnitude), ("angle", angle)] {
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(PsseError::InvalidParameter(format!(
                "{name} range [{lo}, {hi}] is empty"
            )));
        }
    }
    let mut rng = rng::seeded(seed);
    let mut uniform = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.random::<f64>();
    let reference = case.reference_index();
    let values = (0..case.n())
        .map(|i| {
            let m = uniform(magnitude);
            let a = uniform(angle);
            Complex64::from_polar(m, if i == reference { 0.0 } else { a })
        })
        .collect();
    Ok(VoltageState::new(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::parse_case;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rmse_examples() {
        let truth = vec![c(1.0, 0.0), c(0.9, -0.2), c(1.05, 0.1)];
        assert_eq!(rmse(&truth, &truth, 0).unwrap(), 0.0);
        let rot = Complex64::from_polar(1.0, 0.7);
        let spun: Vec<_> = truth.iter().map(|t| t * rot).collect();
        assert!(rmse(&spun, &truth, 0).unwrap() < 1e-15);

        let ones = vec![c(1.0, 0.0); 4];
        let mut est = ones.clone();
        est[0] += 0.01;
        assert!((rmse(&est, &ones, 1).unwrap() - 0.005).abs() < 1e-15);

        assert!(rmse(&ones, &[c(0.0, 0.0); 4], 0).is_err());
    }

    #[test]
    fn random_truth_ranges() {
        let case = parse_case(
            r#"{"base_mva": 100,
            "buses": [{"id": 1}, {"id": 2, "reference": true}, {"id": 3}],
            "branches": [{"from": 1, "to": 2, "r": 0, "x": 0.1}, {"from": 2, "to": 3, "r": 0, "x": 0.1}]}"#,
        )
        .unwrap();
        let flat = random_truth(&case, (1.0, 1.0), (0.0, 0.0), 3).unwrap();
        assert_eq!(flat, VoltageState::flat(3));
        let v = random_truth(&case, (0.9, 1.1), (-0.1, 0.1), 3).unwrap();
        assert_eq!(v[1].im, 0.0);
        assert!(v.iter().all(|z| (0.9..=1.1).contains(&z.norm())));
        assert!(random_truth(&case, (1.1, 0.9), (0.0, 0.0), 3).is_err());
    }
}
