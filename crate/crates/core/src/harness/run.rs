//! Executes experiment configs and writes traces and summaries.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, InitSpec, PlanSpec, SolverSpec, TruthSpec};
use crate::error::PsseError;
use crate::grid::{build_admittance, AdmittanceModel, MeasurementKind, NetworkCase};
use crate::measurement::{
    corrupt, full_plan, normalize, simulate, CorruptionSpec, MeasurementSet, NoiseSpec,
};
use crate::metrics::{random_truth, Truth};
use crate::rng::sub_seed;
use crate::solver::stochastic::build_minibatches;
use crate::solver::{baselines, deterministic, stochastic, Solution};
use crate::state::VoltageState;

/// Failure of a run, classified for the process exit code.
#[derive(Debug)]
pub enum RunError {
    Config(PsseError),
    Solver(PsseError),
    Io(PsseError),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Io(_) => 4,
        }
    }

    pub fn error(&self) -> &PsseError {
        match self {
            RunError::Config(e) | RunError::Solver(e) | RunError::Io(e) => e,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let what = match self {
            RunError::Config(_) => "config error",
            RunError::Solver(_) => "solver error",
            RunError::Io(_) => "i/o error",
        };
        write!(f, "{what}: {}", self.error())
    }
}

impl std::error::Error for RunError {}

/// Classifies a library error raised while preparing inputs.
fn input_error(e: PsseError) -> RunError {
    match e {
        PsseError::Io { .. } => RunError::Io(e),
        _ => RunError::Config(e),
    }
}

fn io_error(path: &Path, source: std::io::Error) -> RunError {
    RunError::Io(PsseError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// Keep only the solvers with these names, in config order.
    pub solvers: Option<Vec<String>>,
}

impl RunOptions {
    pub fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), PsseError> {
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(names) = &self.solvers {
            for n in names {
                if !cfg.solvers.iter().any(|s| s.name() == n) {
                    return Err(PsseError::Config(format!("--solvers: unknown solver '{n}'")));
                }
            }
            cfg.solvers.retain(|s| names.iter().any(|n| n == s.name()));
        }
        cfg.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub final_rmse: f64,
    /// LAV objective on the normalized set, comparable across solvers.
    pub final_objective: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub name: String,
    #[serde(rename = "type")]
    pub solver_type: String,
    pub final_rmse: Stat,
    pub final_objective: Stat,
    pub iterations: Stat,
    pub seconds: Stat,
    pub trials: Vec<TrialResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub label: String,
    pub measurements: usize,
    pub solvers: Vec<SolverSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub points: Vec<PointSummary>,
}

impl Summary {
    pub fn solver(&self, point: usize, name: &str) -> Option<&SolverSummary> {
        self.points.get(point)?.solvers.iter().find(|s| s.name == name)
    }
}

/// Loads `path`, applies `options`, and runs it.
pub fn run(path: impl AsRef<Path>, options: &RunOptions) -> Result<Summary, RunError> {
    let mut cfg = ExperimentConfig::load(path).map_err(input_error)?;
    options.apply(&mut cfg).map_err(RunError::Config)?;
    run_config(&cfg)
}

/// Everything a trial needs besides its seed.
struct Prepared {
    case: NetworkCase,
    model: AdmittanceModel,
}

struct TrialOutput {
    measurements: usize,
    results: Vec<TrialResult>,
}

/// Runs every sweep point and trial of an already validated config with
/// resolved paths.
pub fn run_config(cfg: &ExperimentConfig) -> Result<Summary, RunError> {
    let case = NetworkCase::from_file(&cfg.case).map_err(input_error)?;
    let model = build_admittance(&case);
    let prep = Prepared { case, model };
    let points = cfg.plan_points();
    fs::create_dir_all(&cfg.output).map_err(|e| io_error(&cfg.output, e))?;

    let pool = worker_pool().map_err(RunError::Config)?;
    let mut summaries = Vec::with_capacity(points.len());
    for plan in &points {
        let dir = if cfg.sweep.is_some() {
            cfg.output.join(plan.label())
        } else {
            cfg.output.clone()
        };
        let outputs: Vec<Result<TrialOutput, RunError>> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|k| run_trial(cfg, &prep, plan, k, &dir.join(format!("trial_{k:03}"))))
                .collect()
        });
        let outputs = outputs.into_iter().collect::<Result<Vec<_>, _>>()?;
        summaries.push(summarize(cfg, plan, &outputs));
    }

    let summary = Summary {
        schema_version: super::config::SCHEMA_VERSION,
        name: cfg.name.clone(),
        seed: cfg.seed,
        trials: cfg.trials,
        points: summaries,
    };
    let path = cfg.output.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| RunError::Io(e.into()))?;
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(summary)
}

fn worker_pool() -> Result<rayon::ThreadPool, PsseError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(text) = std::env::var("PSSE_THREADS") {
        let n: usize = text
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| PsseError::Config(format!("PSSE_THREADS='{text}' is not a positive integer")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| PsseError::Config(format!("cannot start worker pool: {e}")))
}

fn summarize(cfg: &ExperimentConfig, plan: &PlanSpec, outputs: &[TrialOutput]) -> PointSummary {
    let solvers = cfg
        .solvers
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            let trials: Vec<TrialResult> = outputs.iter().map(|o| o.results[s].clone()).collect();
            let stat = |f: &dyn Fn(&TrialResult) -> f64| {
                Stat::of(&trials.iter().map(f).collect::<Vec<_>>())
            };
            SolverSummary {
                name: spec.name().to_string(),
                solver_type: spec.type_name().to_string(),
                final_rmse: stat(&|t| t.final_rmse),
                final_objective: stat(&|t| t.final_objective),
                iterations: stat(&|t| t.iterations as f64),
                seconds: stat(&|t| t.seconds),
                trials,
            }
        })
        .collect();
    PointSummary {
        label: plan.label(),
        measurements: outputs.first().map_or(0, |o| o.measurements),
        solvers,
    }
}

/// Per-trial seed; the sweep point does not enter, so every point of a trial
/// shares the same truth.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    sub_seed(seed, trial as u64)
}

const TRUTH_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const CORRUPTION_STREAM: u64 = 3;
const SOLVER_STREAM: u64 = 16;

fn make_truth(cfg: &ExperimentConfig, case: &NetworkCase, seed: u64) -> Result<VoltageState, RunError> {
    match &cfg.truth {
        TruthSpec::Case => {
            let mags: Vec<f64> = case.buses.iter().map(|b| b.voltage_magnitude).collect();
            let angs: Vec<f64> = case.buses.iter().map(|b| b.voltage_angle).collect();
            Ok(VoltageState::from_polar(&mags, &angs))
        }
        TruthSpec::Random {
            magnitude,
            angle_pi,
        } => random_truth(
            case,
            (magnitude[0], magnitude[1]),
            (angle_pi[0] * std::f64::consts::PI, angle_pi[1] * std::f64::consts::PI),
            sub_seed(seed, TRUTH_STREAM),
        )
        .map_err(RunError::Config),
    }
}

/// The simulated (or replayed) raw set and its truth for one trial.
fn trial_data(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    plan: &PlanSpec,
    seed: u64,
) -> Result<(MeasurementSet, VoltageState), RunError> {
    if let Some(dir) = &cfg.replay {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| io_error(&p, e))
        };
        let set = MeasurementSet::from_json(&read("measurements.json")?, &prep.model)
            .map_err(RunError::Config)?;
        let truth: VoltageState =
            serde_json::from_str(&read("truth.json")?).map_err(|e| RunError::Config(e.into()))?;
        if truth.len() != prep.model.n() {
            return Err(RunError::Config(PsseError::Dimension {
                expected: prep.model.n(),
                actual: truth.len(),
            }));
        }
        return Ok((set, truth));
    }
    let truth = make_truth(cfg, &prep.case, seed)?;
    let noise = NoiseSpec::by_class(
        cfg.noise.vsq,
        cfg.noise.flow,
        cfg.noise.injection,
        sub_seed(seed, NOISE_STREAM),
    )
    .map_err(RunError::Config)?;
    let plan = full_plan(&prep.model, &plan.kinds());
    let mut set = simulate(&prep.model, &truth, &plan, &noise).map_err(RunError::Config)?;
    if let Some(c) = &cfg.corruption {
        let spec = CorruptionSpec {
            model: c.model.clone(),
            fraction: c.fraction,
            eligible_kinds: c.eligible.clone().unwrap_or_else(CorruptionSpec::default_eligible),
            seed: sub_seed(seed, CORRUPTION_STREAM),
        };
        set = corrupt(&set, &spec).map_err(RunError::Config)?;
    }
    Ok((set, truth))
}

/// Initial point: flat, or square roots of the measured squared magnitudes.
pub fn initial_state(init: InitSpec, raw: &MeasurementSet) -> VoltageState {
    let mut v = VoltageState::flat(raw.n());
    if init == InitSpec::MeasuredMagnitude {
        for r in raw.records() {
            if r.kind == MeasurementKind::Vsq {
                let z = r.raw_z();
                if z > 0.0 {
                    v[r.location] = Complex64::new(z.sqrt(), 0.0);
                }
            }
        }
    }
    v
}

/// WLS weights `1/σ²` per record; kinds without noise get weight 1.
pub fn wls_weights(cfg: &ExperimentConfig, set: &MeasurementSet) -> Vec<f64> {
    set.records()
        .iter()
        .map(|r| {
            let sigma = if r.kind == MeasurementKind::Vsq {
                cfg.noise.vsq
            } else if r.kind.is_flow() {
                cfg.noise.flow
            } else {
                cfg.noise.injection
            };
            if sigma > 0.0 {
                1.0 / (sigma * sigma)
            } else {
                1.0
            }
        })
        .collect()
}

/// Runs one configured solver.
#[allow(clippy::too_many_arguments)]
pub fn run_solver(
    spec: &SolverSpec,
    cfg: &ExperimentConfig,
    raw: &MeasurementSet,
    normalized: &MeasurementSet,
    reference: usize,
    v0: &VoltageState,
    truth: &Truth,
    seed: u64,
) -> Result<Solution, PsseError> {
    match spec {
        SolverSpec::Deterministic { params, .. } => {
            deterministic::solve(normalized, params, v0, Some(truth))
        }
        SolverSpec::Stochastic {
            params, minibatch, ..
        } => {
            let mut params = params.clone();
            params.seed = sub_seed(seed, params.seed);
            let schedule = minibatch.then(|| build_minibatches(normalized));
            stochastic::solve(normalized, &params, schedule.as_ref(), v0, Some(truth))
        }
        SolverSpec::Wls { params, .. } => baselines::gauss_newton_wls(
            raw,
            &wls_weights(cfg, raw),
            reference,
            v0,
            params,
            Some(truth),
        ),
        SolverSpec::Irls {
            params,
            epsilon,
            normalized: use_normalized,
            ..
        } => {
            let data = if *use_normalized { normalized } else { raw };
            baselines::irls_lav(data, reference, v0, params, *epsilon, Some(truth))
        }
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    plan: &PlanSpec,
    trial: usize,
    dir: &Path,
) -> Result<TrialOutput, RunError> {
    let seed = trial_seed(cfg.seed, trial);
    let (raw, truth_state) = trial_data(cfg, prep, plan, seed)?;
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let write = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| io_error(&p, e))
    };
    write("measurements.json", raw.to_json().map_err(RunError::Io)?)?;
    write(
        "truth.json",
        serde_json::to_string_pretty(&truth_state).map_err(|e| RunError::Io(e.into()))?,
    )?;

    let normalized = if cfg.normalize {
        normalize(&raw).map_err(RunError::Config)?
    } else {
        raw.clone()
    };
    let reference = prep.model.reference;
    let truth = Truth::new(truth_state, reference);
    let v0 = initial_state(cfg.init, &raw);

    let mut results = Vec::with_capacity(cfg.solvers.len());
    for (k, spec) in cfg.solvers.iter().enumerate() {
        let solver_seed = sub_seed(seed, SOLVER_STREAM + k as u64);
        let sol = run_solver(spec, cfg, &raw, &normalized, reference, &v0, &truth, solver_seed)
            .map_err(|e| {
                RunError::Solver(PsseError::Numerical(format!(
                    "solver '{}' failed in trial {trial}: {e}",
                    spec.name()
                )))
            })?;
        let path = dir.join(format!("{}.csv", spec.name()));
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        sol.trace
            .write_csv(std::io::BufWriter::new(file))
            .map_err(|e| io_error(&path, e))?;
        let last = sol.trace.last().expect("trace has the initial row");
        results.push(TrialResult {
            trial,
            final_rmse: truth.rmse(&sol.state),
            final_objective: normalized.lav_objective(&sol.state),
            iterations: sol.trace.iterations(),
            seconds: last.seconds,
            converged: sol.converged,
        });
    }
    Ok(TrialOutput {
        measurements: raw.m(),
        results,
    })
}
