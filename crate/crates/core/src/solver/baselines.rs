//! Weighted least squares Gauss-Newton and IRLS in rectangular coordinates.
//!
//! The state is parameterized by `x = [Re(v); Im(v) without the reference
//! bus]`, `2N − 1` reals, with the reference imaginary part pinned to zero.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PsseError, Result};
use crate::measurement::MeasurementSet;
use crate::metrics::Truth;
use crate::state::VoltageState;

use super::{check_dimension, Recorder, Solution};

/// Map between complex states with zero reference phase and `R^{2N−1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RealParameterization {
    pub n: usize,
    pub reference: usize,
}

impl RealParameterization {
    pub fn new(n: usize, reference: usize) -> Self {
        assert!(reference < n, "reference bus out of range");
        Self { n, reference }
    }

    pub fn dim(&self) -> usize {
        2 * self.n - 1
    }

    /// Column of `Im(v_k)` in `x`, or `None` for the reference bus.
    pub fn imag_column(&self, k: usize) -> Option<usize> {
        match k.cmp(&self.reference) {
            std::cmp::Ordering::Less => Some(self.n + k),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(self.n + k - 1),
        }
    }

    pub fn to_state(&self, x: &[f64]) -> VoltageState {
        assert_eq!(x.len(), self.dim());
        (0..self.n)
            .map(|k| Complex64::new(x[k], self.imag_column(k).map_or(0.0, |c| x[c])))
            .collect::<Vec<_>>()
            .into()
    }

    /// Rotates `v` so the reference bus is real and nonnegative, then flattens.
    pub fn from_state(&self, v: &[Complex64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n);
        let r = v[self.reference];
        let rot = if r.norm() == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            r.conj() / r.norm()
        };
        let mut x = vec![0.0; self.dim()];
        for (k, vk) in v.iter().enumerate() {
            let z = vk * rot;
            x[k] = z.re;
            if let Some(c) = self.imag_column(k) {
                x[c] = z.im;
            }
        }
        x
    }
}

/// Measurement values `h(x)` and the analytic Jacobian `∂h/∂x` (`M × (2N−1)`).
///
/// Row `m` has `2 Re((H_m v)_k)` in the column of `Re(v_k)` and
/// `2 Im((H_m v)_k)` in the column of `Im(v_k)`.
pub fn jacobian(
    set: &MeasurementSet,
    param: &RealParameterization,
    v: &[Complex64],
) -> (Vec<f64>, DMatrix<f64>) {
    let mut values = Vec::with_capacity(set.m());
    let mut jac = DMatrix::zeros(set.m(), param.dim());
    let mut hv = Vec::new();
    for (row, rec) in set.records().iter().enumerate() {
        values.push(rec.matrix.local_product(v, &mut hv));
        for (&k, h) in rec.matrix.support().iter().zip(&hv) {
            jac[(row, k)] = 2.0 * h.re;
            if let Some(c) = param.imag_column(k) {
                jac[(row, c)] = 2.0 * h.im;
            }
        }
    }
    (values, jac)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iters() -> usize {
    50
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            tol: default_tol(),
        }
    }
}

/// Relative pivot size below which the normal matrix counts as singular.
const PIVOT_RATIO: f64 = 1e-12;

/// Solves `(JᵀWJ) Δ = JᵀW r`.
fn weighted_step(jac: &DMatrix<f64>, weights: &[f64], residual: &[f64]) -> Result<DVector<f64>> {
    let (m, p) = jac.shape();
    let mut wj = jac.clone();
    for i in 0..m {
        wj.row_mut(i).scale_mut(weights[i]);
    }
    let normal = jac.transpose() * &wj;
    let rhs = wj.transpose() * DVector::from_column_slice(residual);
    if p > m {
        return Err(PsseError::Unobservable);
    }
    let chol: Cholesky<f64, Dyn> = Cholesky::new(normal).ok_or(PsseError::Unobservable)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d.abs()), hi.max(d.abs())));
    if !(lo > PIVOT_RATIO * hi) {
        return Err(PsseError::Unobservable);
    }
    Ok(chol.solve(&rhs))
}

/// Shared Gauss-Newton loop; `weights_at` supplies per-record weights from the
/// current residuals.
fn gauss_newton_loop<F>(
    set: &MeasurementSet,
    reference: usize,
    v0: &VoltageState,
    config: &BaselineConfig,
    truth: Option<&Truth>,
    mut weights_at: F,
) -> Result<Solution>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    check_dimension(set, v0)?;
    if reference >= set.n() {
        return Err(PsseError::InvalidParameter("reference bus out of range".into()));
    }
    if config.max_iters == 0 || !(config.tol >= 0.0) {
        return Err(PsseError::InvalidParameter(
            "max_iters must be positive and tol nonnegative".into(),
        ));
    }
    let param = RealParameterization::new(set.n(), reference);
    let mut x = param.from_state(v0);
    let mut v = param.to_state(&x);
    let mut recorder = Recorder::new(set, truth);
    recorder.record(0, &v);
    let z: Vec<f64> = set.records().iter().map(|r| r.z).collect();
    let mut converged = false;
    for t in 1..=config.max_iters {
        let (h, jac) = jacobian(set, &param, &v);
        let r: Vec<f64> = z.iter().zip(&h).map(|(z, h)| z - h).collect();
        let w = weights_at(&r);
        let dx = weighted_step(&jac, &w, &r)?;
        for (xi, d) in x.iter_mut().zip(dx.iter()) {
            *xi += d;
        }
        let next = param.to_state(&x);
        let step = next.normalized_distance(&v);
        v = next;
        if !step.is_finite() {
            return Err(PsseError::Numerical("Gauss-Newton step is not finite".into()));
        }
        recorder.record(t, &v);
        if step <= config.tol {
            converged = true;
            break;
        }
    }
    Ok(recorder.finish(v, converged))
}

/// Gauss-Newton on `Σ w_m (z_m − h_m(x))²`.
pub fn gauss_newton_wls(
    set: &MeasurementSet,
    weights: &[f64],
    reference: usize,
    v0: &VoltageState,
    config: &BaselineConfig,
    truth: Option<&Truth>,
) -> Result<Solution> {
    if weights.len() != set.m() {
        return Err(PsseError::Dimension {
            expected: set.m(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(PsseError::InvalidParameter("weights must be positive".into()));
    }
    gauss_newton_loop(set, reference, v0, config, truth, |_| weights.to_vec())
}

/// IRLS for the LAV loss: each iteration is one weighted Gauss-Newton step
/// with `w_m = 1/max(|r_m|, ε)`.
pub fn irls_lav(
    set: &MeasurementSet,
    reference: usize,
    v0: &VoltageState,
    config: &BaselineConfig,
    epsilon: f64,
    truth: Option<&Truth>,
) -> Result<Solution> {
    if !(epsilon > 0.0) {
        return Err(PsseError::InvalidParameter("epsilon must be positive".into()));
    }
    gauss_newton_loop(set, reference, v0, config, truth, |r| {
        r.iter().map(|ri| 1.0 / ri.abs().max(epsilon)).collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_admittance, parse_case, MeasurementKind};
    use crate::measurement::{full_plan, simulate, NoiseSpec};

    fn setup(kinds: &[MeasurementKind]) -> (MeasurementSet, VoltageState) {
        let model = build_admittance(
            &parse_case(
                r#"{"base_mva": 100,
                "buses": [{"id": 1}, {"id": 2, "reference": true}, {"id": 3}],
                "branches": [{"from": 1, "to": 2, "r": 0.01, "x": 0.1},
                             {"from": 2, "to": 3, "r": 0.02, "x": 0.15},
                             {"from": 1, "to": 3, "r": 0.01, "x": 0.2}]}"#,
            )
            .unwrap(),
        );
        let truth = VoltageState::new(vec![
            Complex64::from_polar(0.97, -0.04),
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.02, 0.03),
        ]);
        let set = simulate(&model, &truth, &full_plan(&model, kinds), &NoiseSpec::noiseless(0)).unwrap();
        (set, truth)
    }

    #[test]
    fn parameterization_round_trip() {
        let p = RealParameterization::new(3, 1);
        assert_eq!(p.dim(), 5);
        let x = [1.0, 0.9, 1.1, -0.1, 0.2];
        let v = p.to_state(&x);
        assert_eq!(v[1].im, 0.0);
        assert_eq!(p.from_state(&v), x.to_vec());
    }

    #[test]
    fn wls_recovers_noiseless_state() {
        let (set, truth) = setup(&MeasurementKind::ORDERED);
        let t = Truth::new(truth, 1);
        let sol = gauss_newton_wls(
            &set,
            &vec![1.0; set.m()],
            1,
            &VoltageState::flat(3),
            &BaselineConfig::default(),
            Some(&t),
        )
        .unwrap();
        assert!(sol.converged);
        assert!(t.rmse(&sol.state) < 1e-10);
    }

    #[test]
    fn irls_recovers_noiseless_state() {
        let (set, truth) = setup(&MeasurementKind::ORDERED);
        let t = Truth::new(truth, 1);
        let sol = irls_lav(&set, 1, &VoltageState::flat(3), &BaselineConfig::default(), 1e-8, Some(&t))
            .unwrap();
        assert!(t.rmse(&sol.state) < 1e-8, "rmse {}", t.rmse(&sol.state));
    }

    #[test]
    fn too_few_measurements_is_unobservable() {
        let (set, _) = setup(&[MeasurementKind::Vsq]);
        let err = gauss_newton_wls(
            &set,
            &vec![1.0; set.m()],
            1,
            &VoltageState::flat(3),
            &BaselineConfig::default(),
            None,
        );
        assert!(matches!(err, Err(PsseError::Unobservable)));
    }
}
