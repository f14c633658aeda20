use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::admittance::AdmittanceModel;
use super::sparse::SparseMatrix;
use crate::error::{PsseError, Result};

/// The seven SCADA quantities, each a Hermitian quadratic form of the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasurementKind {
    /// Squared voltage magnitude `|v_n|²`.
    Vsq,
    /// Active power flow at the from end.
    Pf,
    /// Reactive power flow at the from end.
    Qf,
    /// Active power injection.
    Pinj,
    /// Reactive power injection.
    Qinj,
    /// Active power flow at the to end.
    Pt,
    /// Reactive power flow at the to end.
    Qt,
}

impl MeasurementKind {
    /// Enumeration order used by the "ordered types" experiment.
    pub const ORDERED: [MeasurementKind; 7] = [
        MeasurementKind::Vsq,
        MeasurementKind::Pf,
        MeasurementKind::Qf,
        MeasurementKind::Pinj,
        MeasurementKind::Qinj,
        MeasurementKind::Pt,
        MeasurementKind::Qt,
    ];

    pub fn is_flow(self) -> bool {
        matches!(
            self,
            MeasurementKind::Pf | MeasurementKind::Qf | MeasurementKind::Pt | MeasurementKind::Qt
        )
    }

    pub fn is_injection(self) -> bool {
        matches!(self, MeasurementKind::Pinj | MeasurementKind::Qinj)
    }

    pub fn name(self) -> &'static str {
        match self {
            MeasurementKind::Vsq => "vsq",
            MeasurementKind::Pf => "pf",
            MeasurementKind::Qf => "qf",
            MeasurementKind::Pinj => "pinj",
            MeasurementKind::Qinj => "qinj",
            MeasurementKind::Pt => "pt",
            MeasurementKind::Qt => "qt",
        }
    }

    /// Number of valid locations for this kind in `model`.
    pub fn location_count(self, model: &AdmittanceModel) -> usize {
        if self.is_flow() {
            model.l()
        } else {
            model.n()
        }
    }
}

impl fmt::Display for MeasurementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MeasurementKind {
    type Err = PsseError;

    fn from_str(s: &str) -> Result<Self> {
        MeasurementKind::ORDERED
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| PsseError::InvalidParameter(format!("unknown measurement kind '{s}'")))
    }
}

/// Sparse Hermitian matrix `H` of one measurement `v^H H v`.
///
/// Entries use zero-based bus positions and are sorted by `(row, col)`.
/// `support` lists every bus touched by a nonzero entry; the stochastic
/// solver works exclusively on that index set.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementMatrix {
    kind: MeasurementKind,
    location: usize,
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
    support: Vec<usize>,
    // (row, col) positions of each entry within `support`.
    local: Vec<(usize, usize)>,
    frobenius: f64,
}

impl MeasurementMatrix {
    pub(crate) fn from_triplets(
        kind: MeasurementKind,
        location: usize,
        dim: usize,
        triplets: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        let summed = SparseMatrix::from_triplets(dim, dim, triplets);
        let mut entries = Vec::with_capacity(summed.nnz());
        for r in 0..dim {
            for (c, v) in summed.row(r) {
                if v != Complex64::new(0.0, 0.0) {
                    entries.push((r, c, v));
                }
            }
        }
        Self::from_entries(kind, location, dim, entries)
    }

    fn from_entries(
        kind: MeasurementKind,
        location: usize,
        dim: usize,
        entries: Vec<(usize, usize, Complex64)>,
    ) -> Self {
        let mut support: Vec<usize> = entries.iter().flat_map(|&(r, c, _)| [r, c]).collect();
        support.sort_unstable();
        support.dedup();
        let pos = |i: usize| support.binary_search(&i).unwrap();
        let local = entries.iter().map(|&(r, c, _)| (pos(r), pos(c))).collect();
        let frobenius = entries.iter().map(|e| e.2.norm_sqr()).sum::<f64>().sqrt();
        Self {
            kind,
            location,
            dim,
            entries,
            support,
            local,
            frobenius,
        }
    }

    pub fn kind(&self) -> MeasurementKind {
        self.kind
    }

    pub fn location(&self) -> usize {
        self.location
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius
    }

    /// `Re(v^H H v)`, touching only the support.
    ///
    /// Uses the same summation order as [`Self::local_product`], so both
    /// return bitwise-identical values.
    pub fn evaluate(&self, v: &[Complex64]) -> f64 {
        assert_eq!(v.len(), self.dim, "state length does not match matrix");
        let zero = Complex64::new(0.0, 0.0);
        let mut value = 0.0;
        let mut imag = 0.0;
        let mut row = usize::MAX;
        let mut acc = zero;
        for &(r, c, h) in &self.entries {
            if r != row {
                if row != usize::MAX {
                    let t = v[row].conj() * acc;
                    value += t.re;
                    imag += t.im;
                }
                row = r;
                acc = zero;
            }
            acc += h * v[c];
        }
        if row != usize::MAX {
            let t = v[row].conj() * acc;
            value += t.re;
            imag += t.im;
        }
        debug_assert!(
            imag.abs() <= 1e-12 * self.local_norm_sqr(v) * self.frobenius.max(1.0) + 1e-300,
            "quadratic form has imaginary residue {imag}"
        );
        value
    }

    fn local_norm_sqr(&self, v: &[Complex64]) -> f64 {
        self.support.iter().map(|&i| v[i].norm_sqr()).sum()
    }

    /// Writes `(H v)_i` for each `i` in the support into `out` (support order)
    /// and returns `Re(v^H H v)`.
    pub fn local_product(&self, v: &[Complex64], out: &mut Vec<Complex64>) -> f64 {
        out.clear();
        out.resize(self.support.len(), Complex64::new(0.0, 0.0));
        for (&(_, c, h), &(lr, _)) in self.entries.iter().zip(&self.local) {
            out[lr] += h * v[c];
        }
        let mut value = 0.0;
        for (k, &i) in self.support.iter().enumerate() {
            value += (v[i].conj() * out[k]).re;
        }
        value
    }

    /// Returns `H / divisor` with the same structure.
    pub fn scaled(&self, divisor: f64) -> Self {
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, h)| (r, c, h / divisor))
            .collect();
        Self::from_entries(self.kind, self.location, self.dim, entries)
    }

    /// Dense `k×k` block of `H` restricted to its support.
    pub fn support_block(&self) -> DMatrix<Complex64> {
        let k = self.support.len();
        let mut block = DMatrix::zeros(k, k);
        for (&(_, _, h), &(lr, lc)) in self.entries.iter().zip(&self.local) {
            block[(lr, lc)] += h;
        }
        block
    }

    /// Largest absolute eigenvalue of the (Hermitian) support block.
    pub fn spectral_norm(&self) -> f64 {
        if self.support.is_empty() {
            return 0.0;
        }
        let eig = self.support_block().symmetric_eigenvalues();
        eig.iter().fold(0.0f64, |m, &l| m.max(l.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut out = vec![vec![Complex64::new(0.0, 0.0); self.dim]; self.dim];
        for &(r, c, h) in &self.entries {
            out[r][c] += h;
        }
        out
    }
}

/// Builds the measurement matrix of `kind` at `location`.
///
/// `location` is a zero-based bus position for `Vsq`/`Pinj`/`Qinj` and a
/// zero-based in-service branch row for flow kinds.
pub fn measurement_matrix(
    model: &AdmittanceModel,
    kind: MeasurementKind,
    location: usize,
) -> Result<MeasurementMatrix> {
    if location >= kind.location_count(model) {
        return Err(PsseError::InvalidLocation {
            kind: kind.name().to_string(),
            location,
        });
    }
    let n = model.n();
    let half = 0.5;
    let half_j = Complex64::new(0.0, 0.5);
    let mut triplets = Vec::new();

    // H = (Aᴴ e_r e_bᵀ ± e_b e_rᵀ A) / (2 or 2j) for row r of A and bus b.
    let mut stamp = |row: &mut dyn Iterator<Item = (usize, Complex64)>, bus: usize, active: bool| {
        for (j, a) in row {
            if active {
                triplets.push((bus, j, a * half));
                triplets.push((j, bus, a.conj() * half));
            } else {
                triplets.push((bus, j, a * half_j));
                triplets.push((j, bus, -a.conj() * half_j));
            }
        }
    };

    match kind {
        MeasurementKind::Vsq => {
            return Ok(MeasurementMatrix::from_triplets(
                kind,
                location,
                n,
                vec![(location, location, Complex64::new(1.0, 0.0))],
            ));
        }
        MeasurementKind::Pinj | MeasurementKind::Qinj => {
            stamp(&mut model.y.row(location), location, kind == MeasurementKind::Pinj);
        }
        MeasurementKind::Pf | MeasurementKind::Qf => {
            let from = model.branch_ends[location].0;
            stamp(&mut model.yf.row(location), from, kind == MeasurementKind::Pf);
        }
        MeasurementKind::Pt | MeasurementKind::Qt => {
            let to = model.branch_ends[location].1;
            stamp(&mut model.yt.row(location), to, kind == MeasurementKind::Pt);
        }
    }
    Ok(MeasurementMatrix::from_triplets(kind, location, n, triplets))
}
