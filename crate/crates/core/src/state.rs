use std::ops::{Deref, DerefMut};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex bus voltage phasors, indexed by internal bus position `0..N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VoltageState(Vec<Complex64>);

impl VoltageState {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self(values)
    }

    /// Flat profile: every bus at 1∠0.
    pub fn flat(n: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn from_polar(magnitudes: &[f64], angles: &[f64]) -> Self {
        Self(
            magnitudes
                .iter()
                .zip(angles)
                .map(|(&m, &a)| Complex64::from_polar(m, a))
                .collect(),
        )
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// `‖self − other‖₂ / √N`, the normalized step used by every stopping rule.
    pub fn normalized_distance(&self, other: &VoltageState) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let sq: f64 = self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (sq / self.len().max(1) as f64).sqrt()
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }
}

impl Deref for VoltageState {
    type Target = [Complex64];

    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for VoltageState {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

impl From<Vec<Complex64>> for VoltageState {
    fn from(v: Vec<Complex64>) -> Self {
        Self(v)
    }
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
