//! Independent optimality checks for the closed-form proximal operators.
//!
//! Each check draws one random instance, evaluates the operator, and verifies
//! that (a) no point in a 10³-sample random search has a smaller objective and
//! (b) the first-order optimality (or KKT) conditions hold to `TOL`.

use num_complex::Complex64;
use psse::grid::SparseMatrix;
use psse::prox::{complex_l1_prox, ridge_shrink, scalar_abs_prox, AffineProjection};
use rand::Rng;

use super::{norm, random_complex};

pub const TOL: f64 = 1e-10;
pub const SEARCH: usize = 1000;

fn perturb<R: Rng>(rng: &mut R, x: &[Complex64], k: usize) -> Vec<Complex64> {
    // Mix tight and wide perturbations so both local and global dominance count.
    let scale = [1e-6, 1e-3, 1e-1, 1.0, 10.0][k % 5];
    x.iter()
        .zip(random_complex(rng, x.len(), scale))
        .map(|(a, b)| a + b)
        .collect()
}

fn dominates(best: f64, other: f64) -> bool {
    best <= other + 1e-12 * (1.0 + best.abs())
}

/// Ridge step: `argmin ½‖x‖² + (ρ/2)‖x − (w − λ)‖²`.
pub fn check_ridge<R: Rng>(rng: &mut R) -> Result<(), String> {
    let n = rng.random_range(1..=10);
    let w = random_complex(rng, n, 2.0);
    let lam = random_complex(rng, n, 2.0);
    let rho = 10f64.powf(rng.random_range(-2.0..3.0));
    let x = ridge_shrink(&w, &lam, rho);
    let target: Vec<Complex64> = w.iter().zip(&lam).map(|(a, b)| a - b).collect();
    let obj = |y: &[Complex64]| {
        let d: Vec<Complex64> = y.iter().zip(&target).map(|(a, b)| a - b).collect();
        0.5 * norm(y).powi(2) + 0.5 * rho * norm(&d).powi(2)
    };
    let f = obj(&x);
    for k in 0..SEARCH {
        let p = perturb(rng, &x, k);
        if !dominates(f, obj(&p)) {
            return Err(format!("ridge: random point beats closed form ({} < {f})", obj(&p)));
        }
    }
    // Stationarity: x + ρ(x − target) = 0.
    let grad: Vec<Complex64> = x.iter().zip(&target).map(|(a, t)| a + (a - t) * rho).collect();
    let scale = 1.0 + rho * norm(&target);
    if norm(&grad) > TOL * scale {
        return Err(format!("ridge: gradient norm {}", norm(&grad)));
    }
    Ok(())
}

/// `argmin λ‖Re(u) − c‖₁ + ½‖u − d‖²`.
pub fn check_complex_l1<R: Rng>(rng: &mut R) -> Result<(), String> {
    let n = rng.random_range(1..=10);
    let d = random_complex(rng, n, 3.0);
    let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    // Some coordinates start exactly at the kink.
    if n > 1 {
        c[0] = d[0].re;
    }
    let lambda = rng.random_range(0.0..2.0);
    let u = complex_l1_prox(&d, &c, lambda);
    let obj = |y: &[Complex64]| {
        let l1: f64 = y.iter().zip(&c).map(|(a, ci)| (a.re - ci).abs()).sum();
        let diff: Vec<Complex64> = y.iter().zip(&d).map(|(a, b)| a - b).collect();
        lambda * l1 + 0.5 * norm(&diff).powi(2)
    };
    let f = obj(&u);
    for k in 0..SEARCH {
        let p = perturb(rng, &u, k);
        if !dominates(f, obj(&p)) {
            return Err(format!("l1 prox: random point beats closed form ({} < {f})", obj(&p)));
        }
    }
    for i in 0..n {
        if u[i].im != d[i].im {
            return Err(format!("l1 prox: imaginary part changed at {i}"));
        }
        // Re(d − u) ∈ λ ∂|Re(u) − c|.
        let g = d[i].re - u[i].re;
        let r = u[i].re - c[i];
        let ok = if r.abs() > TOL {
            (g - lambda * r.signum()).abs() <= TOL * (1.0 + lambda)
        } else {
            g.abs() <= lambda + TOL
        };
        if !ok {
            return Err(format!("l1 prox: subgradient condition fails at {i} (g = {g}, r = {r})"));
        }
    }
    Ok(())
}

/// Projection of `(b, d)` onto `{(w, u) : A w = u}`.
pub fn check_projection<R: Rng>(rng: &mut R) -> Result<(), String> {
    let m = rng.random_range(1..=10);
    let n = rng.random_range(1..=10);
    let mut triplets = Vec::new();
    for r in 0..m {
        for col in 0..n {
            if rng.random_bool(0.6) {
                triplets.push((r, col, random_complex(rng, 1, 2.0)[0]));
            }
        }
    }
    let a = SparseMatrix::from_triplets(m, n, triplets);
    let b = random_complex(rng, n, 2.0);
    let d = random_complex(rng, m, 2.0);
    let proj = AffineProjection::new(a.clone()).map_err(|e| e.to_string())?;
    let (w, u) = proj.project(&b, &d);
    let obj = |w: &[Complex64], u: &[Complex64]| {
        let dw: Vec<Complex64> = w.iter().zip(&b).map(|(x, y)| x - y).collect();
        let du: Vec<Complex64> = u.iter().zip(&d).map(|(x, y)| x - y).collect();
        0.5 * (norm(&dw).powi(2) + norm(&du).powi(2))
    };
    let f = obj(&w, &u);
    for k in 0..SEARCH {
        let wp = perturb(rng, &w, k);
        let up = a.mul_vec(&wp);
        if !dominates(f, obj(&wp, &up)) {
            return Err("projection: feasible random point is closer".into());
        }
    }
    // KKT: w − b + Aᴴ(u − d) = 0 and A w = u.
    let du: Vec<Complex64> = u.iter().zip(&d).map(|(x, y)| x - y).collect();
    let mut ah_du = vec![Complex64::new(0.0, 0.0); n];
    for r in 0..m {
        for (col, v) in a.row(r) {
            ah_du[col] += v.conj() * du[r];
        }
    }
    let stat: Vec<Complex64> = (0..n).map(|i| w[i] - b[i] + ah_du[i]).collect();
    let aw = a.mul_vec(&w);
    let feas: Vec<Complex64> = aw.iter().zip(&u).map(|(x, y)| x - y).collect();
    let scale = 1.0 + norm(&b) + norm(&d);
    if norm(&stat) > TOL * scale || norm(&feas) > TOL * scale {
        return Err(format!("projection: KKT residuals {} {}", norm(&stat), norm(&feas)));
    }
    Ok(())
}

/// `argmin |Re(aᴴw) − c| + ‖w‖²/(2τ)`.
pub fn check_scalar_abs<R: Rng>(rng: &mut R) -> Result<(), String> {
    let n = rng.random_range(1..=10);
    let a = random_complex(rng, n, 2.0);
    let tau = 10f64.powf(rng.random_range(-2.0..1.0));
    let a2 = norm(&a).powi(2);
    // Half the instances sit in the interpolating regime, half are clipped.
    let c = if rng.random_bool(0.5) {
        rng.random_range(-1.0..1.0) * tau * a2
    } else {
        rng.random_range(1.5..5.0) * tau * a2 * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
    };
    let w = scalar_abs_prox(&a, c, tau);
    let inner = |w: &[Complex64]| -> f64 { a.iter().zip(w).map(|(x, y)| (x.conj() * y).re).sum() };
    let obj = |w: &[Complex64]| (inner(w) - c).abs() + norm(w).powi(2) / (2.0 * tau);
    let f = obj(&w);
    let eps = 1e-4;
    for sign in [-1.0, 1.0] {
        let p: Vec<Complex64> = w.iter().zip(&a).map(|(x, y)| x + y * (sign * eps)).collect();
        if !dominates(f, obj(&p)) {
            return Err("scalar prox: ±εa beats closed form".into());
        }
    }
    for k in 0..SEARCH {
        let p = perturb(rng, &w, k);
        if !dominates(f, obj(&p)) {
            return Err(format!("scalar prox: random point beats closed form ({} < {f})", obj(&p)));
        }
    }
    // w = s·a with s ∈ −τ ∂|r|, r = Re(aᴴw) − c.
    let s = inner(&w) / a2;
    let off: Vec<Complex64> = w.iter().zip(&a).map(|(x, y)| x - y * s).collect();
    if norm(&off) > TOL * (1.0 + norm(&w)) {
        return Err("scalar prox: result is not a real multiple of a".into());
    }
    let r = inner(&w) - c;
    let ok = if r.abs() > TOL * (1.0 + c.abs()) {
        (s + tau * r.signum()).abs() <= TOL * (1.0 + tau)
    } else {
        s.abs() <= tau + TOL
    };
    if !ok {
        return Err(format!("scalar prox: optimality fails (s = {s}, r = {r}, τ = {tau})"));
    }
    Ok(())
}
