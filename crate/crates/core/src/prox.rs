//! Closed-form proximal operators used by both LAV solvers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{PsseError, Result};
use crate::grid::SparseMatrix;

/// `sign(x)·max(|x| − τ, 0)` for one scalar.
#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Elementwise soft thresholding `S_τ(x)`.
pub fn soft_threshold(x: &[f64], tau: f64) -> Vec<f64> {
    debug_assert!(tau >= 0.0);
    x.iter().map(|&xi| shrink(xi, tau)).collect()
}

/// `argmin_u λ‖Re(u) − c‖₁ + ½‖u − d‖²`.
///
/// The imaginary part passes through; the real part is shrunk towards `c`.
pub fn complex_l1_prox(d: &[Complex64], c: &[f64], lambda: f64) -> Vec<Complex64> {
    assert_eq!(d.len(), c.len());
    d.iter()
        .zip(c)
        .map(|(di, &ci)| {
            let r = di.re - ci;
            let s = shrink(r, lambda);
            // An unshrunk residual returns d itself rather than c + (d − c).
            let re = if s == r { di.re } else { ci + s };
            Complex64::new(re, di.im)
        })
        .collect()
}

/// `(ρ/(1+ρ))·(w − λ)`, the minimizer of `½‖x‖² + (ρ/2)‖x − (w − λ)‖²`.
pub fn ridge_shrink(w: &[Complex64], lambda_dual: &[Complex64], rho: f64) -> Vec<Complex64> {
    assert_eq!(w.len(), lambda_dual.len());
    let k = rho / (1.0 + rho);
    w.iter().zip(lambda_dual).map(|(a, b)| (a - b) * k).collect()
}

/// `clamp(x, −τ, τ)`.
#[inline]
pub fn interval_project(x: f64, tau: f64) -> f64 {
    debug_assert!(tau >= 0.0);
    x.clamp(-tau, tau)
}

/// Coefficient `s` such that `s·a` minimizes `|Re(aᴴw) − c| + ‖w‖²/(2τ)`,
/// given `‖a‖²`. A zero `a` yields 0.
#[inline]
pub fn scalar_abs_coefficient(a_norm_sqr: f64, c: f64, tau: f64) -> f64 {
    if a_norm_sqr == 0.0 {
        return 0.0;
    }
    interval_project(c / a_norm_sqr, tau)
}

/// Minimizer of `|Re(aᴴw) − c| + ‖w‖²/(2τ)`: a real multiple of `a` with
/// coefficient in `[−τ, τ]`.
pub fn scalar_abs_prox(a: &[Complex64], c: f64, tau: f64) -> Vec<Complex64> {
    let nrm: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    let s = scalar_abs_coefficient(nrm, c, tau);
    a.iter().map(|x| x * s).collect()
}

/// Cached factorization for projecting onto `{(w, u) : A w = u}`.
///
/// Holds a dense Cholesky factor of `I + AᴴA`; `A` itself stays sparse so
/// each projection costs one pair of sparse products plus two triangular
/// solves.
#[derive(Clone, Debug)]
pub struct AffineProjection {
    a: SparseMatrix,
    a_h: SparseMatrix,
    chol: Cholesky<Complex64, Dyn>,
}

impl AffineProjection {
    /// Factors `I + AᴴA`. Setup costs `O(M·k² + N³)` for rows with `k` nonzeros.
    pub fn new(a: SparseMatrix) -> Result<Self> {
        let n = a.cols();
        let mut gram = DMatrix::<Complex64>::identity(n, n);
        for r in 0..a.rows() {
            let row: Vec<(usize, Complex64)> = a.row(r).collect();
            for &(k, ak) in &row {
                let ak_conj = ak.conj();
                for &(l, al) in &row {
                    gram[(k, l)] += ak_conj * al;
                }
            }
        }
        if gram.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PsseError::Numerical("non-finite entry in I + AᴴA".into()));
        }
        let chol = Cholesky::new(gram)
            .ok_or_else(|| PsseError::Numerical("I + AᴴA is not positive definite".into()))?;
        let a_h = conjugate_transpose(&a);
        Ok(Self { a, a_h, chol })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.a
    }

    /// Euclidean projection of `(b, d)`: `w = (I + AᴴA)⁻¹(b + Aᴴd)`, `u = A w`.
    pub fn project(&self, b: &[Complex64], d: &[Complex64]) -> (Vec<Complex64>, Vec<Complex64>) {
        assert_eq!(b.len(), self.a.cols());
        assert_eq!(d.len(), self.a.rows());
        let ahd = self.a_h.mul_vec(d);
        let rhs = DVector::from_iterator(b.len(), b.iter().zip(&ahd).map(|(x, y)| x + y));
        let w = self.chol.solve(&rhs);
        let w: Vec<Complex64> = w.iter().copied().collect();
        let u = self.a.mul_vec(&w);
        (w, u)
    }
}

/// Free-function form of [`AffineProjection::new`].
pub fn affine_projection_factor(a: SparseMatrix) -> Result<AffineProjection> {
    AffineProjection::new(a)
}

/// Free-function form of [`AffineProjection::project`].
pub fn affine_project(
    handle: &AffineProjection,
    b: &[Complex64],
    d: &[Complex64],
) -> (Vec<Complex64>, Vec<Complex64>) {
    handle.project(b, d)
}

pub(crate) fn conjugate_transpose(a: &SparseMatrix) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(a.nnz());
    for r in 0..a.rows() {
        for (c, v) in a.row(r) {
            triplets.push((c, r, v.conj()));
        }
    }
    SparseMatrix::from_triplets(a.cols(), a.rows(), triplets)
}
