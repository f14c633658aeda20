//! Network cases, admittance matrices and the quadratic measurement model.

mod admittance;
mod case;
mod matpower;
mod matrix;
mod sparse;

pub use admittance::{build_admittance, AdmittanceModel};
pub use case::{parse_case, Branch, Bus, NetworkCase};
pub use matrix::{measurement_matrix, MeasurementKind, MeasurementMatrix};
pub use sparse::SparseMatrix;
