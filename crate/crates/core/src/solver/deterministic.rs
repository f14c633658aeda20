//! Prox-linear LAV solver with an ADMM inner loop.
//!
//! Each outer iteration linearizes the residuals at `v_t` and minimizes
//!
//! ```text
//! ‖Re(A w) − c‖₁ + ½‖w‖²,   A_m = (2μ/M) (H_m v_t)ᴴ,   c_m = (μ/M)(z_m − v_tᴴ H_m v_t)
//! ```
//!
//! by ADMM over the splitting `w̃ = w`, `ũ = u`, `A w = u`, then sets
//! `v_{t+1} = v_t + w*`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{PsseError, Result};
use crate::grid::SparseMatrix;
use crate::measurement::MeasurementSet;
use crate::metrics::Truth;
use crate::prox::{complex_l1_prox, ridge_shrink, AffineProjection};
use crate::state::{norm, VoltageState};

use super::{check_dimension, Recorder, Solution};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterministicConfig {
    /// Outer (prox-linear) stepsize.
    pub mu: f64,
    /// ADMM penalty.
    pub rho: f64,
    pub inner_iters: usize,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Early ADMM exit once both primal residuals fall below this.
    #[serde(default)]
    pub inner_tol: Option<f64>,
    /// Weight of the ℓ₁ term inside the ADMM splitting; the soft threshold
    /// is `l1_weight / ρ`.
    #[serde(default = "default_l1_weight")]
    pub l1_weight: f64,
}

fn default_max_outer() -> usize {
    100
}

fn default_tol() -> f64 {
    1e-10
}

fn default_l1_weight() -> f64 {
    0.5
}

impl Default for DeterministicConfig {
    fn default() -> Self {
        Self {
            mu: 200.0,
            rho: 100.0,
            inner_iters: 150,
            max_outer: default_max_outer(),
            tol: default_tol(),
            inner_tol: None,
            l1_weight: default_l1_weight(),
        }
    }
}

impl DeterministicConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(PsseError::InvalidParameter(what.to_string()));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return bad("mu must be positive");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho must be positive");
        }
        if self.inner_iters == 0 || self.max_outer == 0 {
            return bad("inner_iters and max_outer must be positive");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be nonnegative");
        }
        if self.inner_tol.is_some_and(|t| !(t >= 0.0)) {
            return bad("inner_tol must be nonnegative");
        }
        if !(self.l1_weight > 0.0 && self.l1_weight.is_finite()) {
            return bad("l1_weight must be positive");
        }
        Ok(())
    }
}

/// Linearized residual model at one iterate.
#[derive(Clone, Debug)]
pub struct Linearization {
    /// `M×N`, row `m` supported on `support(H_m)`.
    pub a: SparseMatrix,
    pub c: Vec<f64>,
}

impl Linearization {
    /// `‖Re(A w) − c‖₁ + ½‖w‖²`.
    pub fn objective(&self, w: &[Complex64]) -> f64 {
        let aw = self.a.mul_vec(w);
        let l1: f64 = aw.iter().zip(&self.c).map(|(x, c)| (x.re - c).abs()).sum();
        l1 + 0.5 * norm(w).powi(2)
    }
}

/// Assembles `A_t` and `c_t` at `v` from the record supports.
pub fn linearize(set: &MeasurementSet, v: &[Complex64], mu: f64) -> Linearization {
    let m = set.m();
    let scale_a = 2.0 * mu / m as f64;
    let scale_c = mu / m as f64;
    let mut triplets = Vec::new();
    let mut c = Vec::with_capacity(m);
    let mut hv = Vec::new();
    for (row, rec) in set.records().iter().enumerate() {
        let value = rec.matrix.local_product(v, &mut hv);
        for (&i, h) in rec.matrix.support().iter().zip(&hv) {
            triplets.push((row, i, h.conj() * scale_a));
        }
        c.push(scale_c * (rec.z - value));
    }
    Linearization {
        a: SparseMatrix::from_triplets(m, set.n(), triplets),
        c,
    }
}

/// Inner ADMM result.
#[derive(Clone, Debug)]
pub struct SubproblemSolution {
    pub w: Vec<Complex64>,
    pub iterations: usize,
    /// `‖w̃ − w‖` at the last iteration.
    pub residual_w: f64,
    /// `‖ũ − u‖` at the last iteration.
    pub residual_u: f64,
}

/// Runs the ADMM recursions from zero primal and (scaled) dual variables.
pub fn solve_subproblem(lin: &Linearization, config: &DeterministicConfig) -> Result<SubproblemSolution> {
    let projection = AffineProjection::new(lin.a.clone())?;
    let (m, n) = (lin.a.rows(), lin.a.cols());
    let zero = Complex64::new(0.0, 0.0);
    let mut w = vec![zero; n];
    let mut u = vec![zero; m];
    let mut lam = vec![zero; n];
    let mut nu = vec![zero; m];
    let threshold = config.l1_weight / config.rho;
    let mut shifted = vec![zero; m];
    let mut residual_w = f64::INFINITY;
    let mut residual_u = f64::INFINITY;
    let mut iterations = 0;

    for _ in 0..config.inner_iters {
        iterations += 1;
        let w_tilde = ridge_shrink(&w, &lam, config.rho);
        for ((s, ui), nui) in shifted.iter_mut().zip(&u).zip(&nu) {
            *s = ui - nui;
        }
        let u_tilde = complex_l1_prox(&shifted, &lin.c, threshold);

        let b: Vec<Complex64> = w_tilde.iter().zip(&lam).map(|(x, l)| x + l).collect();
        let d: Vec<Complex64> = u_tilde.iter().zip(&nu).map(|(x, l)| x + l).collect();
        let (w_next, u_next) = projection.project(&b, &d);
        w = w_next;
        u = u_next;

        let mut rw = 0.0;
        for ((l, wt), wi) in lam.iter_mut().zip(&w_tilde).zip(&w) {
            let r = wt - wi;
            *l += r;
            rw += r.norm_sqr();
        }
        let mut ru = 0.0;
        for ((l, ut), ui) in nu.iter_mut().zip(&u_tilde).zip(&u) {
            let r = ut - ui;
            *l += r;
            ru += r.norm_sqr();
        }
        residual_w = rw.sqrt();
        residual_u = ru.sqrt();
        if !(residual_w.is_finite() && residual_u.is_finite()) {
            return Err(PsseError::Numerical(
                "ADMM iterates diverged (non-finite residual)".into(),
            ));
        }
        if config
            .inner_tol
            .is_some_and(|t| residual_w <= t && residual_u <= t)
        {
            break;
        }
    }
    Ok(SubproblemSolution {
        w,
        iterations,
        residual_w,
        residual_u,
    })
}

/// Prox-linear iterations `v_{t+1} = v_t + w*` until the normalized step
/// `‖w*‖/√N` drops to `tol` or `max_outer` is reached.
pub fn solve(
    set: &MeasurementSet,
    config: &DeterministicConfig,
    v0: &VoltageState,
    truth: Option<&Truth>,
) -> Result<Solution> {
    config.validate()?;
    check_dimension(set, v0)?;
    let n = set.n();
    let mut v = v0.clone();
    let mut recorder = Recorder::new(set, truth);
    recorder.record(0, &v);
    let mut converged = false;
    for t in 1..=config.max_outer {
        let lin = linearize(set, &v, config.mu);
        let sub = solve_subproblem(&lin, config)?;
        for (vi, wi) in v.iter_mut().zip(&sub.w) {
            *vi += wi;
        }
        recorder.record(t, &v);
        if norm(&sub.w) / (n as f64).sqrt() <= config.tol {
            converged = true;
            break;
        }
    }
    Ok(recorder.finish(v, converged))
}
