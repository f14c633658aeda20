//! Experiment configuration files.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PsseError, Result};
use crate::grid::MeasurementKind;
use crate::measurement::CorruptionModel;
use crate::solver::baselines::BaselineConfig;
use crate::solver::deterministic::DeterministicConfig;
use crate::solver::stochastic::StochasticConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    /// Case file, relative to the config file's directory.
    pub case: PathBuf,
    #[serde(default)]
    pub truth: TruthSpec,
    pub plan: PlanSpec,
    /// Ordered-type counts to sweep over; replaces `plan` when present.
    #[serde(default)]
    pub sweep: Option<Vec<usize>>,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub corruption: Option<CorruptionConfig>,
    #[serde(default)]
    pub init: InitSpec,
    /// Run the LAV solvers and IRLS on spectrally normalized data.
    #[serde(default = "default_true")]
    pub normalize: bool,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Output directory, relative to the config file's directory.
    pub output: PathBuf,
    /// Directory of a previous trial (holding `measurements.json` and
    /// `truth.json`) to re-solve without simulating.
    #[serde(default)]
    pub replay: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

fn default_trials() -> usize {
    1
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthSpec {
    /// Voltage magnitudes and angles stored in the case file.
    #[default]
    Case,
    /// Uniform magnitudes and angles; angles are given in multiples of π.
    Random {
        magnitude: [f64; 2],
        angle_pi: [f64; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlanSpec {
    /// Every location of the listed kinds.
    Kinds(Vec<MeasurementKind>),
    /// The first `k` kinds of the order vsq, pf, qf, pinj, qinj, pt, qt.
    OrderedTypes(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub vsq: f64,
    #[serde(default)]
    pub flow: f64,
    #[serde(default)]
    pub injection: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            vsq: 0.0,
            flow: 0.0,
            injection: 0.0,
        }
    }
}

// `deny_unknown_fields` cannot be combined with the flattened model tag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionConfig {
    #[serde(flatten)]
    pub model: CorruptionModel,
    pub fraction: f64,
    /// Defaults to all flow and injection kinds.
    #[serde(default)]
    pub eligible: Option<Vec<MeasurementKind>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    /// All-ones voltage profile.
    #[default]
    Flat,
    /// Square roots of the measured squared magnitudes (1 where unmeasured).
    MeasuredMagnitude,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Deterministic {
        name: String,
        params: DeterministicConfig,
    },
    Stochastic {
        name: String,
        params: StochasticConfig,
        /// Use disjoint-support mini-batches.
        #[serde(default)]
        minibatch: bool,
    },
    Wls {
        name: String,
        #[serde(default)]
        params: BaselineConfig,
    },
    Irls {
        name: String,
        #[serde(default)]
        params: BaselineConfig,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        /// Reweight the normalized set instead of the raw measurements.
        #[serde(default)]
        normalized: bool,
    },
}

fn default_epsilon() -> f64 {
    1e-8
}

impl SolverSpec {
    pub fn name(&self) -> &str {
        match self {
            SolverSpec::Deterministic { name, .. }
            | SolverSpec::Stochastic { name, .. }
            | SolverSpec::Wls { name, .. }
            | SolverSpec::Irls { name, .. } => name,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            SolverSpec::Deterministic { .. } => "deterministic",
            SolverSpec::Stochastic { .. } => "stochastic",
            SolverSpec::Wls { .. } => "wls",
            SolverSpec::Irls { .. } => "irls",
        }
    }

    fn validate(&self) -> Result<()> {
        let name = self.name();
        if name.is_empty()
            || !name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return Err(PsseError::Config(format!(
                "solver name '{name}' must be nonempty and use only [A-Za-z0-9_-]"
            )));
        }
        let wrap = |e: PsseError| PsseError::Config(format!("solver '{name}': {e}"));
        match self {
            SolverSpec::Deterministic { params, .. } => params.validate().map_err(wrap),
            SolverSpec::Stochastic { params, .. } => params.validate().map_err(wrap),
            SolverSpec::Wls { params, .. } => validate_baseline(params).map_err(wrap),
            SolverSpec::Irls {
                params, epsilon, ..
            } => {
                validate_baseline(params).map_err(wrap)?;
                if !(*epsilon > 0.0) {
                    return Err(wrap(PsseError::InvalidParameter(
                        "epsilon must be positive".into(),
                    )));
                }
                Ok(())
            }
        }
    }
}

fn validate_baseline(p: &BaselineConfig) -> Result<()> {
    if p.max_iters == 0 || !(p.tol >= 0.0) {
        return Err(PsseError::InvalidParameter(
            "max_iters must be positive and tol nonnegative".into(),
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Reads and validates a config; relative paths are resolved against the
    /// config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PsseError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| PsseError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &PathBuf| {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        self.case = join(&self.case);
        self.output = join(&self.output);
        self.replay = self.replay.as_ref().map(join);
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(PsseError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.solvers.is_empty() {
            return err("solvers: at least one solver is required".into());
        }
        let mut names = HashSet::new();
        for s in &self.solvers {
            s.validate()?;
            if !names.insert(s.name()) {
                return err(format!("solvers: duplicate name '{}'", s.name()));
            }
        }
        if self.trials == 0 {
            return err("trials must be at least 1".into());
        }
        let check_count = |k: usize| -> Result<()> {
            if k == 0 || k > MeasurementKind::ORDERED.len() {
                return Err(PsseError::Config(format!(
                    "ordered type count {k} outside 1..=7"
                )));
            }
            Ok(())
        };
        match &self.plan {
            PlanSpec::Kinds(k) if k.is_empty() => return err("plan: no measurement kinds".into()),
            PlanSpec::Kinds(_) => {}
            PlanSpec::OrderedTypes(k) => check_count(*k)?,
        }
        if let Some(points) = &self.sweep {
            if points.is_empty() {
                return err("sweep: no points".into());
            }
            for &k in points {
                check_count(k)?;
            }
        }
        let n = &self.noise;
        if [n.vsq, n.flow, n.injection]
            .iter()
            .any(|s| !(*s >= 0.0 && s.is_finite()))
        {
            return err("noise: standard deviations must be finite and nonnegative".into());
        }
        if let Some(c) = &self.corruption {
            if !(0.0..=1.0).contains(&c.fraction) {
                return err(format!("corruption: fraction {} outside [0, 1]", c.fraction));
            }
            if let CorruptionModel::M1 { stddev, .. } = c.model {
                if !(stddev >= 0.0) {
                    return err("corruption: stddev must be nonnegative".into());
                }
            }
        }
        if let TruthSpec::Random {
            magnitude,
            angle_pi,
        } = &self.truth
        {
            if !(magnitude[0] <= magnitude[1]) || !(angle_pi[0] <= angle_pi[1]) {
                return err("truth: ranges must satisfy low <= high".into());
            }
        }
        if self.replay.is_some() && (self.trials != 1 || self.sweep.is_some()) {
            return err("replay requires trials = 1 and no sweep".into());
        }
        Ok(())
    }

    /// Ordered-type counts or explicit kinds for each sweep point.
    pub fn plan_points(&self) -> Vec<PlanSpec> {
        match &self.sweep {
            Some(points) => points.iter().map(|&k| PlanSpec::OrderedTypes(k)).collect(),
            None => vec![self.plan.clone()],
        }
    }
}

impl PlanSpec {
    pub fn kinds(&self) -> Vec<MeasurementKind> {
        match self {
            PlanSpec::Kinds(k) => k.clone(),
            PlanSpec::OrderedTypes(k) => MeasurementKind::ORDERED[..*k].to_vec(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PlanSpec::Kinds(k) => k.iter().map(|k| k.name()).collect::<Vec<_>>().join("+"),
            PlanSpec::OrderedTypes(k) => format!("types{k}"),
        }
    }
}
