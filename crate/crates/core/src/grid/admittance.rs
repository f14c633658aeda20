use num_complex::Complex64;

use super::case::NetworkCase;
use super::sparse::SparseMatrix;

/// Bus and branch admittance matrices of a case.
///
/// Row `l` of `yf`/`yt` corresponds to the `l`-th in-service branch; branch
/// measurements use that row index as their location.
#[derive(Clone, Debug)]
pub struct AdmittanceModel {
    pub y: SparseMatrix,
    pub yf: SparseMatrix,
    pub yt: SparseMatrix,
    /// Zero-based `(from, to)` bus positions per in-service branch.
    pub branch_ends: Vec<(usize, usize)>,
    /// Index into `NetworkCase::branches` per in-service branch.
    pub branch_index: Vec<usize>,
    pub reference: usize,
}

impl AdmittanceModel {
    pub fn n(&self) -> usize {
        self.y.rows()
    }

    pub fn l(&self) -> usize {
        self.branch_ends.len()
    }
}

/// Builds `Y`, `Yf`, `Yt` with the standard π branch model.
///
/// Series admittance `ys = 1/(r + jx)`, half the charging susceptance at each
/// end, complex tap `t = τ·e^{jθ}` on the from side:
///
/// ```text
/// Yff = (ys + j b/2) / |t|²    Yft = −ys / conj(t)
/// Ytf = −ys / t                Ytt =  ys + j b/2
/// ```
pub fn build_admittance(case: &NetworkCase) -> AdmittanceModel {
    let n = case.n();
    let mut yf = Vec::new();
    let mut yt = Vec::new();
    let mut ybus = Vec::new();
    let mut branch_ends = Vec::new();
    let mut branch_index = Vec::new();

    for (k, br) in case.branches.iter().enumerate() {
        if !br.in_service {
            continue;
        }
        let row = branch_ends.len();
        let (f, t) = (br.from_bus - 1, br.to_bus - 1);
        let ys = Complex64::new(1.0, 0.0)
            / Complex64::new(br.series_resistance, br.series_reactance);
        let half_b = Complex64::new(0.0, br.total_charging_susceptance / 2.0);
        let tap = Complex64::from_polar(br.tap_ratio, br.phase_shift);

        let ytt = ys + half_b;
        let yff = ytt / (tap * tap.conj());
        let yft = -ys / tap.conj();
        let ytf = -ys / tap;

        yf.push((row, f, yff));
        yf.push((row, t, yft));
        yt.push((row, f, ytf));
        yt.push((row, t, ytt));

        ybus.push((f, f, yff));
        ybus.push((f, t, yft));
        ybus.push((t, f, ytf));
        ybus.push((t, t, ytt));

        branch_ends.push((f, t));
        branch_index.push(k);
    }
    for (i, bus) in case.buses.iter().enumerate() {
        let shunt = Complex64::new(bus.shunt_conductance, bus.shunt_susceptance);
        if shunt != Complex64::new(0.0, 0.0) {
            ybus.push((i, i, shunt));
        }
    }

    let l = branch_ends.len();
    AdmittanceModel {
        y: SparseMatrix::from_triplets(n, n, ybus),
        yf: SparseMatrix::from_triplets(l, n, yf),
        yt: SparseMatrix::from_triplets(l, n, yt),
        branch_ends,
        branch_index,
        reference: case.reference_index(),
    }
}
