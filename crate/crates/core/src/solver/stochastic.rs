//! Stochastic prox-linear LAV solver.
//!
//! A step on record `m` with stepsize `μ_t` computes `a = 2 H_m v` and
//! `c = z_m − vᴴ H_m v` on the support of `H_m` and applies
//! `v ← v + clamp(c/‖a‖², −μ_t, μ_t)·a`. Mini-batches group records with
//! pairwise-disjoint supports so their steps can be applied together.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PsseError, Result};
use crate::grid::MeasurementKind;
use crate::measurement::{MeasurementSet, Record};
use crate::metrics::Truth;
use crate::prox::scalar_abs_coefficient;
use crate::rng;
use crate::state::VoltageState;

use super::{check_dimension, Recorder, Solution};

/// How the next record (or batch) is picked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Independent uniform draws.
    #[default]
    Uniform,
    /// A fresh random permutation every epoch.
    Cyclic,
    /// Index order every epoch.
    Sequential,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StochasticConfig {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Fixed stepsize; overrides `alpha·t^(−beta)` when set.
    #[serde(default)]
    pub constant_step: Option<f64>,
    #[serde(default)]
    pub sampling: Sampling,
    pub max_epochs: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_alpha() -> f64 {
    1.0
}

fn default_beta() -> f64 {
    0.8
}

fn default_tol() -> f64 {
    1e-10
}

impl Default for StochasticConfig {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            beta: default_beta(),
            constant_step: None,
            sampling: Sampling::Uniform,
            max_epochs: 100,
            tol: default_tol(),
            seed: 0,
        }
    }
}

impl StochasticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(PsseError::InvalidParameter(what.to_string()));
        match self.constant_step {
            Some(s) if !(s > 0.0 && s.is_finite()) => return bad("constant_step must be positive"),
            Some(_) => {}
            None => {
                if !(self.alpha > 0.0 && self.alpha.is_finite()) {
                    return bad("alpha must be positive");
                }
                if !(self.beta > 0.5 && self.beta <= 1.0) {
                    return bad("beta must lie in (0.5, 1]");
                }
            }
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if !(self.tol >= 0.0) {
            return bad("tol must be nonnegative");
        }
        Ok(())
    }

    /// Stepsize of step `t ≥ 1`.
    pub fn step_size(&self, t: u64) -> f64 {
        match self.constant_step {
            Some(s) => s,
            None => self.alpha * (t as f64).powf(-self.beta),
        }
    }
}

/// Work done by one single-record step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepOutcome {
    /// Clipped coefficient applied to `a`.
    pub coefficient: f64,
    /// State entries written.
    pub touched: usize,
    /// Multiply-adds spent, proportional to the number of stored entries.
    pub ops: usize,
}

/// Reusable buffers for `H v` on a support and, for packed steps, the
/// support itself.
#[derive(Clone, Debug, Default)]
pub struct StepScratch {
    hv: Vec<Complex64>,
    rows: Vec<u32>,
}

/// Clipped coefficient from the residual and `H v` on the support.
fn coefficient(z: f64, value: f64, hv: &[Complex64], mu_t: f64) -> f64 {
    let c = z - value;
    // a = 2 H v, so ‖a‖² = 4‖Hv‖² and the step is s·a = 2s·Hv.
    let a_norm_sqr: f64 = 4.0 * hv.iter().map(|x| x.norm_sqr()).sum::<f64>();
    scalar_abs_coefficient(a_norm_sqr, c, mu_t)
}

/// Step coefficient and `H v` on the support, evaluated at `v`.
fn step_direction(
    record: &Record,
    v: &[Complex64],
    mu_t: f64,
    hv: &mut Vec<Complex64>,
) -> (f64, usize) {
    let value = record.matrix.local_product(v, hv);
    let s = coefficient(record.z, value, hv, mu_t);
    let ops = record.matrix.entries().len() + 2 * hv.len();
    (s, ops)
}

fn apply_on(
    support: impl Iterator<Item = usize>,
    v: &mut [Complex64],
    s: f64,
    hv: &[Complex64],
) -> usize {
    if s == 0.0 {
        return 0;
    }
    let mut touched = 0;
    for (i, h) in support.zip(hv) {
        let a = h * 2.0;
        if a != Complex64::new(0.0, 0.0) {
            v[i] += a * s;
            touched += 1;
        }
    }
    touched
}

fn apply_step(record: &Record, v: &mut [Complex64], s: f64, hv: &[Complex64]) -> usize {
    apply_on(record.matrix.support().iter().copied(), v, s, hv)
}

/// One closed-form step on `record`, updating `v` in place on the support only.
pub fn stochastic_step(
    record: &Record,
    v: &mut [Complex64],
    mu_t: f64,
    scratch: &mut StepScratch,
) -> StepOutcome {
    let (s, ops) = step_direction(record, v, mu_t, &mut scratch.hv);
    let touched = apply_step(record, v, s, &scratch.hv);
    StepOutcome {
        coefficient: s,
        touched,
        ops: ops + touched,
    }
}

/// One 24-byte cell of a packed block. The first cell of a block is the
/// header (`a` = z, `row` = entry count); the rest are entries
/// (`a + ib` = H_rc).
#[derive(Clone, Copy, Debug)]
struct Cell {
    a: f64,
    b: f64,
    row: u32,
    col: u32,
}

/// The step data of a whole set in one flat array, one contiguous block per
/// record: a header cell followed by the entries in row-major order.
///
/// A random step then reads a few adjacent cache lines instead of a record
/// and three separate allocations, which keeps the step cost flat as the
/// network grows. Steps are bitwise identical to [`stochastic_step`].
#[derive(Clone, Debug)]
pub struct PackedRecords {
    offsets: Vec<u32>,
    cells: Vec<Cell>,
}

impl PackedRecords {
    pub fn new(set: &MeasurementSet) -> Result<Self> {
        let narrow = |x: usize| {
            u32::try_from(x).map_err(|_| {
                PsseError::InvalidParameter(format!("{x} exceeds the packed index range"))
            })
        };
        let mut offsets = Vec::with_capacity(set.m());
        let mut cells = Vec::new();
        for r in set.records() {
            offsets.push(narrow(cells.len())?);
            let entries = r.matrix.entries();
            cells.push(Cell {
                a: r.z,
                b: 0.0,
                row: narrow(entries.len())?,
                col: 0,
            });
            for &(row, col, h) in entries {
                cells.push(Cell {
                    a: h.re,
                    b: h.im,
                    row: narrow(row)?,
                    col: narrow(col)?,
                });
            }
        }
        Ok(Self { offsets, cells })
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Steps through `order`, record `order[k]` with stepsize `mu(k)`,
    /// prefetching blocks a few steps ahead so that random orders over large
    /// sets do not wait on memory.
    pub fn steps(
        &self,
        order: &[usize],
        v: &mut [Complex64],
        mut mu: impl FnMut(usize) -> f64,
        scratch: &mut StepScratch,
    ) {
        const AHEAD: usize = 8;
        for &m in order.iter().take(AHEAD) {
            self.prefetch(m);
        }
        for (k, &m) in order.iter().enumerate() {
            if let Some(&next) = order.get(k + AHEAD) {
                self.prefetch(next);
            }
            self.step(m, v, mu(k), scratch);
        }
    }

    #[inline]
    fn prefetch(&self, m: usize) {
        #[cfg(target_arch = "x86_64")]
        {
            use std::arch::x86_64::{_mm_prefetch, _MM_HINT_T0};
            let start = self.offsets[m] as usize;
            let p = self.cells[start..].as_ptr() as *const i8;
            // SAFETY: prefetch is a hint and never faults; `p` points into
            // `cells`, and the second line is at most one block further.
            unsafe {
                _mm_prefetch::<_MM_HINT_T0>(p);
                _mm_prefetch::<_MM_HINT_T0>(p.wrapping_add(64));
            }
        }
        #[cfg(not(target_arch = "x86_64"))]
        let _ = m;
    }

    /// Same step as [`stochastic_step`] on record `m`.
    pub fn step(&self, m: usize, v: &mut [Complex64], mu_t: f64, scratch: &mut StepScratch) -> StepOutcome {
        let start = self.offsets[m] as usize;
        let head = self.cells[start];
        let terms = &self.cells[start + 1..start + 1 + head.row as usize];
        let StepScratch { hv, rows } = scratch;
        hv.clear();
        rows.clear();
        // Entries are row-major and Hermitian, so the distinct rows are the
        // support in ascending order.
        for t in terms {
            if rows.last() != Some(&t.row) {
                rows.push(t.row);
                hv.push(Complex64::new(0.0, 0.0));
            }
            *hv.last_mut().expect("pushed above") += Complex64::new(t.a, t.b) * v[t.col as usize];
        }
        let mut value = 0.0;
        for (&i, h) in rows.iter().zip(hv.iter()) {
            value += (v[i as usize].conj() * h).re;
        }
        let s = coefficient(head.a, value, hv, mu_t);
        let touched = apply_on(rows.iter().map(|&i| i as usize), v, s, hv);
        StepOutcome {
            coefficient: s,
            touched,
            ops: terms.len() + 2 * hv.len() + touched,
        }
    }
}

/// Record groups with pairwise-disjoint supports.
#[derive(Clone, Debug, PartialEq)]
pub struct MiniBatchSchedule {
    pub batches: Vec<Vec<usize>>,
}

impl MiniBatchSchedule {
    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }

    /// Checks that every record appears exactly once and that supports within
    /// each batch are disjoint. Returns the offending batch on failure.
    pub fn verify(&self, set: &MeasurementSet) -> Result<()> {
        let mut seen = vec![false; set.m()];
        let mut owner = vec![usize::MAX; set.n()];
        for (b, batch) in self.batches.iter().enumerate() {
            for &m in batch {
                if m >= set.m() || std::mem::replace(&mut seen[m], true) {
                    return Err(PsseError::InvalidParameter(format!(
                        "record {m} missing or repeated in batch {b}"
                    )));
                }
                for &i in set.records()[m].matrix.support() {
                    if owner[i] == b {
                        return Err(PsseError::InvalidParameter(format!(
                            "batch {b} has overlapping supports at bus {i}"
                        )));
                    }
                    owner[i] = b;
                }
            }
        }
        if let Some(m) = seen.iter().position(|s| !s) {
            return Err(PsseError::InvalidParameter(format!("record {m} not scheduled")));
        }
        Ok(())
    }
}

/// Greedy coloring of the support-conflict graph, kind by kind.
///
/// Records of one kind are visited by descending support size, then index,
/// and placed in the first batch of that kind whose buses they do not touch.
pub fn build_minibatches(set: &MeasurementSet) -> MiniBatchSchedule {
    let mut batches = Vec::new();
    for kind in MeasurementKind::ORDERED {
        let mut members: Vec<usize> = (0..set.m())
            .filter(|&m| set.records()[m].kind == kind)
            .collect();
        let size = |m: usize| set.records()[m].matrix.support().len();
        members.sort_by(|&a, &b| size(b).cmp(&size(a)).then(a.cmp(&b)));

        // used[i] holds the color that last claimed bus i, per kind.
        let mut colors: Vec<Vec<usize>> = Vec::new();
        let mut used: Vec<Vec<bool>> = Vec::new();
        for m in members {
            let support = set.records()[m].matrix.support();
            let slot = used
                .iter()
                .position(|u| support.iter().all(|&i| !u[i]))
                .unwrap_or_else(|| {
                    used.push(vec![false; set.n()]);
                    colors.push(Vec::new());
                    used.len() - 1
                });
            for &i in support {
                used[slot][i] = true;
            }
            colors[slot].push(m);
        }
        for mut c in colors {
            c.sort_unstable();
            batches.push(c);
        }
    }
    MiniBatchSchedule { batches }
}

/// Applies the steps of all records in `batch`, each computed at the incoming
/// `v`. Records must have pairwise-disjoint supports.
pub fn minibatch_step(
    set: &MeasurementSet,
    batch: &[usize],
    v: &mut [Complex64],
    mu_t: f64,
    scratch: &mut Vec<StepScratch>,
) -> StepOutcome {
    scratch.resize_with(batch.len(), StepScratch::default);
    let mut coefficients = Vec::with_capacity(batch.len());
    let mut total = StepOutcome::default();
    for (&m, buf) in batch.iter().zip(scratch.iter_mut()) {
        let (s, ops) = step_direction(&set.records()[m], v, mu_t, &mut buf.hv);
        coefficients.push(s);
        total.ops += ops;
    }
    for ((&m, buf), &s) in batch.iter().zip(scratch.iter()).zip(&coefficients) {
        let touched = apply_step(&set.records()[m], v, s, &buf.hv);
        total.touched += touched;
        total.ops += touched;
    }
    total
}

/// Index order for one epoch of `len` draws over `count` items.
fn epoch_order<R: Rng>(sampling: Sampling, count: usize, rng: &mut R, order: &mut Vec<usize>) {
    order.clear();
    match sampling {
        Sampling::Uniform => order.extend((0..count).map(|_| rng.random_range(0..count))),
        Sampling::Cyclic => {
            order.extend(0..count);
            order.shuffle(rng);
        }
        Sampling::Sequential => order.extend(0..count),
    }
}

/// Runs epochs of `M` single steps, or of `B` batch steps when a schedule is
/// supplied. The trace holds one row per epoch; the run stops once the
/// normalized change between epoch snapshots is at most `tol`.
pub fn solve(
    set: &MeasurementSet,
    config: &StochasticConfig,
    schedule: Option<&MiniBatchSchedule>,
    v0: &VoltageState,
    truth: Option<&Truth>,
) -> Result<Solution> {
    config.validate()?;
    check_dimension(set, v0)?;
    if set.m() == 0 {
        return Err(PsseError::InvalidParameter("measurement set is empty".into()));
    }
    if let Some(s) = schedule {
        s.verify(set)?;
    }
    let mut rng = rng::seeded(config.seed);
    let mut v = v0.clone();
    let mut snapshot = v.clone();
    let mut recorder = Recorder::new(set, truth);
    recorder.record(0, &v);

    let packed = match schedule {
        Some(_) => None,
        None => Some(PackedRecords::new(set)?),
    };
    let mut single = StepScratch::default();
    let mut batch_scratch = Vec::new();
    let mut order = Vec::new();
    let mut t: u64 = 0;
    let mut converged = false;

    for epoch in 1..=config.max_epochs {
        match schedule {
            Some(sched) => {
                epoch_order(config.sampling, sched.len(), &mut rng, &mut order);
                for &b in &order {
                    t += 1;
                    let mu = config.step_size(t);
                    minibatch_step(set, &sched.batches[b], &mut v, mu, &mut batch_scratch);
                }
            }
            None => {
                let packed = packed.as_ref().expect("built without a schedule");
                epoch_order(config.sampling, set.m(), &mut rng, &mut order);
                let base = t;
                packed.steps(&order, &mut v, |k| config.step_size(base + k as u64 + 1), &mut single);
                t += order.len() as u64;
            }
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PsseError::Numerical(format!("iterate became non-finite in epoch {epoch}")));
        }
        recorder.record(epoch, &v);
        if v.normalized_distance(&snapshot) <= config.tol {
            converged = true;
            break;
        }
        snapshot.copy_from_slice(&v);
    }
    Ok(recorder.finish(v, converged))
}
