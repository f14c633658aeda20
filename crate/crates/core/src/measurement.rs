//! Measurement sets: simulation, corruption and normalization.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PsseError, Result};
use crate::grid::{measurement_matrix, AdmittanceModel, MeasurementKind, MeasurementMatrix};
use crate::rng;

/// One measurement `z ≈ v^H H v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub kind: MeasurementKind,
    pub location: usize,
    pub z: f64,
    pub matrix: MeasurementMatrix,
    /// Divisor applied to both `z` and `matrix` (1.0 when unnormalized).
    pub norm_factor: f64,
    pub corrupted: bool,
    /// Support values of the surrogate state used by an M2 corruption.
    pub surrogate: Option<Vec<f64>>,
}

impl Record {
    /// `z` in the units of the raw measurement.
    pub fn raw_z(&self) -> f64 {
        self.z * self.norm_factor
    }

    /// Residual `z − v^H H v`.
    pub fn residual(&self, v: &[Complex64]) -> f64 {
        self.z - self.matrix.evaluate(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    n: usize,
    records: Vec<Record>,
}

impl MeasurementSet {
    pub fn new(n: usize, records: Vec<Record>) -> Self {
        Self { n, records }
    }

    /// Number of records `M`.
    pub fn m(&self) -> usize {
        self.records.len()
    }

    /// State dimension `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn corrupted_count(&self) -> usize {
        self.records.iter().filter(|r| r.corrupted).count()
    }

    /// Mean absolute residual over all records.
    pub fn lav_objective(&self, v: &[Complex64]) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        let total: f64 = self.records.iter().map(|r| r.residual(v).abs()).sum();
        total / self.records.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = SetDoc {
            n_buses: self.n,
            records: self
                .records
                .iter()
                .map(|r| RecordDoc {
                    kind: r.kind,
                    location: r.location,
                    z: r.z,
                    corrupted: r.corrupted,
                    norm_factor: r.norm_factor,
                    surrogate: r.surrogate.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Rebuilds a set from its JSON form; matrices are regenerated from `model`
    /// and divided by each record's `norm_factor`.
    pub fn from_json(text: &str, model: &AdmittanceModel) -> Result<Self> {
        let doc: SetDoc = serde_json::from_str(text)?;
        if doc.n_buses != model.n() {
            return Err(PsseError::Dimension {
                expected: model.n(),
                actual: doc.n_buses,
            });
        }
        let mut records = Vec::with_capacity(doc.records.len());
        for r in doc.records {
            if !(r.norm_factor > 0.0) {
                return Err(PsseError::InvalidParameter(format!(
                    "norm_factor must be positive, got {}",
                    r.norm_factor
                )));
            }
            let raw = measurement_matrix(model, r.kind, r.location)?;
            let matrix = if r.norm_factor == 1.0 {
                raw
            } else {
                raw.scaled(r.norm_factor)
            };
            records.push(Record {
                kind: r.kind,
                location: r.location,
                z: r.z,
                matrix,
                norm_factor: r.norm_factor,
                corrupted: r.corrupted,
                surrogate: r.surrogate,
            });
        }
        Ok(Self {
            n: doc.n_buses,
            records,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SetDoc {
    n_buses: usize,
    records: Vec<RecordDoc>,
}

#[derive(Serialize, Deserialize)]
struct RecordDoc {
    kind: MeasurementKind,
    location: usize,
    z: f64,
    corrupted: bool,
    norm_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    surrogate: Option<Vec<f64>>,
}

/// Gaussian noise standard deviations (per-unit) per measurement kind.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    sigmas: [f64; 7],
    pub seed: u64,
}

impl NoiseSpec {
    /// Same deviation for every flow kind and for both injection kinds.
    pub fn by_class(vsq: f64, flow: f64, injection: f64, seed: u64) -> Result<Self> {
        let mut sigmas = [0.0; 7];
        for (s, kind) in sigmas.iter_mut().zip(MeasurementKind::ORDERED) {
            *s = if kind == MeasurementKind::Vsq {
                vsq
            } else if kind.is_flow() {
                flow
            } else {
                injection
            };
        }
        Self::per_kind(sigmas, seed)
    }

    /// Deviations in [`MeasurementKind::ORDERED`] order.
    pub fn per_kind(sigmas: [f64; 7], seed: u64) -> Result<Self> {
        if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(PsseError::InvalidParameter(
                "noise standard deviations must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { sigmas, seed })
    }

    pub fn noiseless(seed: u64) -> Self {
        Self {
            sigmas: [0.0; 7],
            seed,
        }
    }

    pub fn sigma(&self, kind: MeasurementKind) -> f64 {
        let pos = MeasurementKind::ORDERED
            .iter()
            .position(|&k| k == kind)
            .unwrap();
        self.sigmas[pos]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum CorruptionModel {
    /// Outliers independent of the measurement matrices: Laplacian draws.
    M1 { mean: f64, stddev: f64 },
    /// Outliers built from the matrices: `ṽᵀ H ṽ` with a standard Gaussian `ṽ`.
    M2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorruptionSpec {
    pub model: CorruptionModel,
    pub fraction: f64,
    pub eligible_kinds: Vec<MeasurementKind>,
    pub seed: u64,
}

impl CorruptionSpec {
    /// Line flows and bus injections.
    pub fn default_eligible() -> Vec<MeasurementKind> {
        MeasurementKind::ORDERED
            .into_iter()
            .filter(|k| *k != MeasurementKind::Vsq)
            .collect()
    }
}

/// Every location of each kind, in the order the kinds are given.
pub fn full_plan(
    model: &AdmittanceModel,
    kinds: &[MeasurementKind],
) -> Vec<(MeasurementKind, usize)> {
    kinds
        .iter()
        .flat_map(|&k| (0..k.location_count(model)).map(move |loc| (k, loc)))
        .collect()
}

/// The first `count` kinds of [`MeasurementKind::ORDERED`], all locations.
pub fn ordered_plan(model: &AdmittanceModel, count: usize) -> Vec<(MeasurementKind, usize)> {
    let count = count.min(MeasurementKind::ORDERED.len());
    full_plan(model, &MeasurementKind::ORDERED[..count])
}

/// Evaluates each planned measurement at `v_true` and adds Gaussian noise.
pub fn simulate(
    model: &AdmittanceModel,
    v_true: &[Complex64],
    plan: &[(MeasurementKind, usize)],
    noise: &NoiseSpec,
) -> Result<MeasurementSet> {
    if v_true.len() != model.n() {
        return Err(PsseError::Dimension {
            expected: model.n(),
            actual: v_true.len(),
        });
    }
    let mut rng = rng::seeded(noise.seed);
    let mut records = Vec::with_capacity(plan.len());
    for &(kind, location) in plan {
        let matrix = measurement_matrix(model, kind, location)?;
        let e: f64 = rng.sample(StandardNormal);
        let z = matrix.evaluate(v_true) + noise.sigma(kind) * e;
        records.push(Record {
            kind,
            location,
            z,
            matrix,
            norm_factor: 1.0,
            corrupted: false,
            surrogate: None,
        });
    }
    Ok(MeasurementSet::new(model.n(), records))
}

/// Replaces `⌊fraction·M⌋` randomly chosen eligible records by outliers.
pub fn corrupt(set: &MeasurementSet, spec: &CorruptionSpec) -> Result<MeasurementSet> {
    if !(0.0..=1.0).contains(&spec.fraction) {
        return Err(PsseError::InvalidParameter(format!(
            "corruption fraction {} outside [0, 1]",
            spec.fraction
        )));
    }
    let mut eligible: Vec<usize> = set
        .records
        .iter()
        .enumerate()
        .filter(|(_, r)| spec.eligible_kinds.contains(&r.kind))
        .map(|(i, _)| i)
        .collect();
    let requested = (spec.fraction * set.m() as f64).floor() as usize;
    if requested > eligible.len() {
        return Err(PsseError::TooManyCorrupted {
            requested,
            eligible: eligible.len(),
        });
    }
    let mut out = set.clone();
    if requested == 0 {
        return Ok(out);
    }

    let mut rng = rng::seeded(spec.seed);
    // Partial Fisher-Yates: the first `requested` slots become the sample.
    for i in 0..requested {
        let j = rng.random_range(i..eligible.len());
        eligible.swap(i, j);
    }
    for &idx in &eligible[..requested] {
        let record = &mut out.records[idx];
        match spec.model {
            CorruptionModel::M1 { mean, stddev } => {
                record.z = laplace(&mut rng, mean, stddev) / record.norm_factor;
            }
            CorruptionModel::M2 => {
                let surrogate: Vec<f64> = record
                    .matrix
                    .support()
                    .iter()
                    .map(|_| rng.sample(StandardNormal))
                    .collect();
                record.z = surrogate_value(&record.matrix, &surrogate);
                record.surrogate = Some(surrogate);
            }
        }
        record.corrupted = true;
    }
    Ok(out)
}

/// `ṽᵀ H ṽ` for a real surrogate given on the support of `H`.
pub fn surrogate_value(matrix: &MeasurementMatrix, support_values: &[f64]) -> f64 {
    let support = matrix.support();
    let mut acc = Complex64::new(0.0, 0.0);
    for &(r, c, h) in matrix.entries() {
        let vr = support_values[support.binary_search(&r).unwrap()];
        let vc = support_values[support.binary_search(&c).unwrap()];
        acc += h * (vr * vc);
    }
    acc.re
}

/// Laplacian draw by inverse CDF; a standard deviation `s` maps to scale `s/√2`.
fn laplace<R: Rng>(rng: &mut R, mean: f64, stddev: f64) -> f64 {
    let scale = stddev / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    mean - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Divides each record's matrix and value by the matrix spectral norm.
pub fn normalize(set: &MeasurementSet) -> Result<MeasurementSet> {
    let mut records = Vec::with_capacity(set.m());
    for (i, r) in set.records.iter().enumerate() {
        let s = r.matrix.spectral_norm();
        if s == 0.0 {
            return Err(PsseError::ZeroMatrix(i));
        }
        records.push(Record {
            matrix: r.matrix.scaled(s),
            z: r.z / s,
            norm_factor: r.norm_factor * s,
            ..r.clone()
        });
    }
    Ok(MeasurementSet::new(set.n, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_admittance, parse_case};

    fn three_bus() -> AdmittanceModel {
        build_admittance(
            &parse_case(
                r#"{"base_mva": 100,
                "buses": [{"id": 1, "reference": true}, {"id": 2, "bs": 0.05}, {"id": 3}],
                "branches": [{"from": 1, "to": 2, "r": 0.01, "x": 0.1, "b": 0.02},
                             {"from": 2, "to": 3, "r": 0.02, "x": 0.2, "tap": 0.97}]}"#,
            )
            .unwrap(),
        )
    }

    fn truth() -> Vec<Complex64> {
        vec![
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(0.98, -0.05),
            Complex64::from_polar(1.01, -0.1),
        ]
    }

    #[test]
    fn noiseless_is_exact() {
        let model = three_bus();
        let plan = full_plan(&model, &MeasurementKind::ORDERED);
        let set = simulate(&model, &truth(), &plan, &NoiseSpec::noiseless(3)).unwrap();
        assert_eq!(set.m(), 3 + 2 * 4 + 3 * 2);
        for r in set.records() {
            assert_eq!(r.z, r.matrix.evaluate(&truth()));
        }
        assert_eq!(set.lav_objective(&truth()), 0.0);
    }

    #[test]
    fn simulate_rejects_bad_plan() {
        let model = three_bus();
        let err = simulate(&model, &truth(), &[(MeasurementKind::Pf, 5)], &NoiseSpec::noiseless(0));
        assert!(matches!(err, Err(PsseError::InvalidLocation { .. })));
    }

    #[test]
    fn zero_fraction_is_identity() {
        let model = three_bus();
        let set = simulate(&model, &truth(), &ordered_plan(&model, 7), &NoiseSpec::noiseless(1)).unwrap();
        let spec = CorruptionSpec {
            model: CorruptionModel::M1 { mean: 0.0, stddev: 30.0 },
            fraction: 0.0,
            eligible_kinds: CorruptionSpec::default_eligible(),
            seed: 9,
        };
        assert_eq!(corrupt(&set, &spec).unwrap(), set);
    }

    #[test]
    fn too_many_corrupted() {
        let model = three_bus();
        let set = simulate(&model, &truth(), &ordered_plan(&model, 3), &NoiseSpec::noiseless(1)).unwrap();
        let spec = CorruptionSpec {
            model: CorruptionModel::M2,
            fraction: 0.9,
            eligible_kinds: vec![MeasurementKind::Vsq],
            seed: 9,
        };
        assert!(matches!(corrupt(&set, &spec), Err(PsseError::TooManyCorrupted { .. })));
    }

    #[test]
    fn m2_values_recompute_from_surrogate() {
        let model = three_bus();
        let set = simulate(&model, &truth(), &ordered_plan(&model, 7), &NoiseSpec::noiseless(1)).unwrap();
        let spec = CorruptionSpec {
            model: CorruptionModel::M2,
            fraction: 0.5,
            eligible_kinds: CorruptionSpec::default_eligible(),
            seed: 4,
        };
        let bad = corrupt(&set, &spec).unwrap();
        assert_eq!(bad.corrupted_count(), set.m() / 2);
        for r in bad.records().iter().filter(|r| r.corrupted) {
            let s = r.surrogate.as_ref().unwrap();
            // Dense recomputation over the full matrix.
            let mut full = [0.0; 3];
            for (k, &i) in r.matrix.support().iter().enumerate() {
                full[i] = s[k];
            }
            let dense = r.matrix.to_dense();
            let mut q = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    q += (dense[i][j] * full[i] * full[j]).re;
                }
            }
            assert!((r.z - q).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_moments() {
        let mut rng = rng::seeded(11);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| laplace(&mut rng, 0.0, 30.0)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.5, "mean {mean}");
        assert!((var.sqrt() - 30.0).abs() < 0.6, "std {}", var.sqrt());
    }

    #[test]
    fn normalize_vsq_unchanged_and_idempotent() {
        let model = three_bus();
        let set = simulate(&model, &truth(), &ordered_plan(&model, 7), &NoiseSpec::noiseless(2)).unwrap();
        let once = normalize(&set).unwrap();
        for (a, b) in set.records().iter().zip(once.records()) {
            if a.kind == MeasurementKind::Vsq {
                assert_eq!(b.norm_factor, 1.0);
                assert_eq!(a.matrix, b.matrix);
            }
            assert!((b.matrix.spectral_norm() - 1.0).abs() < 1e-12);
        }
        let twice = normalize(&once).unwrap();
        for (a, b) in once.records().iter().zip(twice.records()) {
            for (x, y) in a.matrix.entries().iter().zip(b.matrix.entries()) {
                assert!((x.2 - y.2).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let model = three_bus();
        let set = simulate(
            &model,
            &truth(),
            &ordered_plan(&model, 7),
            &NoiseSpec::by_class(0.004, 0.008, 0.01, 5).unwrap(),
        )
        .unwrap();
        let normalized = normalize(&set).unwrap();
        for s in [&set, &normalized] {
            let back = MeasurementSet::from_json(&s.to_json().unwrap(), &model).unwrap();
            assert_eq!(&back, s);
        }
    }
}
