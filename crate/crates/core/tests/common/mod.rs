#![allow(dead_code)]

pub mod checks;
pub mod oracles;

use std::path::PathBuf;

use num_complex::Complex64;
use psse::grid::{build_admittance, parse_case, AdmittanceModel, MeasurementMatrix, NetworkCase};
use psse::measurement::{full_plan, simulate};
use psse::{MeasurementKind, MeasurementSet, NoiseSpec, VoltageState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn case_path(name: &str) -> PathBuf {
    repo_root().join("cases").join(name)
}

pub fn load_case(name: &str) -> (NetworkCase, AdmittanceModel) {
    let case = NetworkCase::from_file(case_path(name)).expect("bundled case parses");
    let model = build_admittance(&case);
    (case, model)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_complex<R: Rng>(rng: &mut R, n: usize, scale: f64) -> Vec<Complex64> {
    (0..n)
        .map(|_| c(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
        .collect()
}

/// Voltages near the flat profile, magnitude in [0.9, 1.1] and angle within ±0.2 rad.
pub fn random_state<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::from_polar(rng.random_range(0.9..1.1), rng.random_range(-0.2..0.2)))
        .collect()
}

pub fn case_truth(case: &NetworkCase) -> VoltageState {
    let mags: Vec<f64> = case.buses.iter().map(|b| b.voltage_magnitude).collect();
    let angs: Vec<f64> = case.buses.iter().map(|b| b.voltage_angle).collect();
    VoltageState::from_polar(&mags, &angs)
}

pub fn noisy_set(
    model: &AdmittanceModel,
    truth: &[Complex64],
    kinds: &[MeasurementKind],
    sigma: f64,
    seed: u64,
) -> MeasurementSet {
    let plan = full_plan(model, kinds);
    let noise = NoiseSpec::by_class(sigma, sigma, sigma, seed).unwrap();
    simulate(model, truth, &plan, &noise).unwrap()
}

/// `vᴴ H v` from the dense matrix with a plain double loop.
pub fn dense_quadratic(h: &MeasurementMatrix, v: &[Complex64]) -> Complex64 {
    let dense = h.to_dense();
    let mut acc = c(0.0, 0.0);
    for (i, row) in dense.iter().enumerate() {
        for (j, hij) in row.iter().enumerate() {
            acc += v[i].conj() * hij * v[j];
        }
    }
    acc
}

/// JSON ring of `n` buses with identical lines and the reference at bus 1.
pub fn ring_case(n: usize) -> NetworkCase {
    let buses: Vec<String> = (1..=n)
        .map(|i| format!(r#"{{"id":{i},"gs":0,"bs":0,"reference":{}}}"#, i == 1))
        .collect();
    let branches: Vec<String> = (1..=n)
        .map(|i| {
            let j = i % n + 1;
            format!(r#"{{"from":{i},"to":{j},"r":0.01,"x":0.1,"b":0.02}}"#)
        })
        .collect();
    let text = format!(
        r#"{{"base_mva":100,"buses":[{}],"branches":[{}]}}"#,
        buses.join(","),
        branches.join(",")
    );
    parse_case(&text).expect("ring case parses")
}

pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
