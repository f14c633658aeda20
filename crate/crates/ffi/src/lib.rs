//! C ABI over the `psse` library.
//!
//! Cases and measurement sets are exposed as opaque handles created by
//! `psse_*_parse`/`psse_*_load`/`psse_measurements_*` and released with the
//! matching `*_free`. Complex vectors cross the boundary as separate real and
//! imaginary `double` arrays. Every fallible call returns a [`PsseStatus`];
//! on failure `psse_last_error_message` describes the error for the calling
//! thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use psse::grid::{build_admittance, AdmittanceModel, MeasurementKind, NetworkCase};
use psse::measurement::{self, CorruptionModel, CorruptionSpec, MeasurementSet, NoiseSpec};
use psse::metrics;
use psse::solver::deterministic::{self, DeterministicConfig};
use psse::solver::stochastic::{self, build_minibatches, Sampling, StochasticConfig};
use psse::{Complex64, PsseError, VoltageState};

/// Result codes returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    InvalidArgument = 4,
    Numerical = 5,
    Unobservable = 6,
    Io = 7,
    Panic = 8,
}

/// Measurement kind codes, in the canonical order. Arrays of kinds cross the
/// boundary as `uint32_t` and are range-checked.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PsseKind {
    Vsq = 0,
    Pf = 1,
    Qf = 2,
    Pinj = 3,
    Qinj = 4,
    Pt = 5,
    Qt = 6,
}

/// Parameters of the deterministic prox-linear solver.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PsseDeterministicParams {
    pub mu: f64,
    pub rho: f64,
    pub inner_iters: usize,
    pub max_outer: usize,
    pub tol: f64,
    /// Soft-threshold weight; the library default is 0.5.
    pub l1_weight: f64,
}

/// Parameters of the stochastic prox-linear solver.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct PsseStochasticParams {
    pub alpha: f64,
    pub beta: f64,
    /// Used instead of `alpha·t^(-beta)` when positive.
    pub constant_step: f64,
    pub max_epochs: usize,
    pub tol: f64,
    pub seed: u64,
    /// 0 = uniform, 1 = per-epoch permutation, 2 = index order.
    pub sampling: u32,
    /// Nonzero to use disjoint-support mini-batches.
    pub minibatch: u32,
}

/// A parsed network with its admittance matrices.
pub struct PsseCase {
    case: NetworkCase,
    model: AdmittanceModel,
}

/// A measurement set tied to the case it was built from.
pub struct PsseMeasurementSet {
    set: MeasurementSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &PsseError) -> PsseStatus {
    match e {
        PsseError::Parse { .. } | PsseError::Json(_) => PsseStatus::Parse,
        PsseError::Numerical(_) => PsseStatus::Numerical,
        PsseError::Unobservable => PsseStatus::Unobservable,
        PsseError::Io { .. } => PsseStatus::Io,
        _ => PsseStatus::InvalidArgument,
    }
}

struct Failure(PsseStatus, String);

impl From<PsseError> for Failure {
    fn from(e: PsseError) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(PsseStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> PsseStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PsseStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            PsseStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(PsseStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn complex_arg(re: *const f64, im: *const f64, n: usize) -> Result<Vec<Complex64>, Failure> {
    if re.is_null() || im.is_null() {
        return Err(null("vector"));
    }
    let re = std::slice::from_raw_parts(re, n);
    let im = std::slice::from_raw_parts(im, n);
    Ok(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
}

unsafe fn write_complex(v: &[Complex64], re: *mut f64, im: *mut f64) -> Result<(), Failure> {
    if re.is_null() || im.is_null() {
        return Err(null("output vector"));
    }
    for (i, z) in v.iter().enumerate() {
        *re.add(i) = z.re;
        *im.add(i) = z.im;
    }
    Ok(())
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn check_len(expected: usize, actual: usize) -> Result<(), Failure> {
    if expected != actual {
        return Err(PsseError::Dimension { expected, actual }.into());
    }
    Ok(())
}

fn kind_of(code: u32) -> Result<MeasurementKind, Failure> {
    MeasurementKind::ORDERED
        .get(code as usize)
        .copied()
        .ok_or_else(|| Failure(PsseStatus::InvalidArgument, format!("unknown measurement kind {code}")))
}

fn new_case(case: NetworkCase) -> PsseCase {
    let model = build_admittance(&case);
    PsseCase { case, model }
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn psse_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a MATPOWER or JSON case from a NUL-terminated string.
///
/// # Safety
/// `text` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn psse_case_parse(text: *const c_char, out: *mut *mut PsseCase) -> PsseStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        put(out, new_case(psse::parse_case(text)?))
    })
}

/// Loads a case file from disk.
///
/// # Safety
/// `path` must be a valid C string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn psse_case_load(path: *const c_char, out: *mut *mut PsseCase) -> PsseStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        put(out, new_case(NetworkCase::from_file(Path::new(path))?))
    })
}

/// Releases a case. Null is ignored.
///
/// # Safety
/// `case` must come from `psse_case_parse`/`psse_case_load` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn psse_case_free(case: *mut PsseCase) {
    if !case.is_null() {
        drop(Box::from_raw(case));
    }
}

/// Number of buses `N`, or 0 for a null handle.
///
/// # Safety
/// `case` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn psse_case_bus_count(case: *const PsseCase) -> usize {
    case.as_ref().map_or(0, |c| c.case.n())
}

/// Number of in-service branches `L`, or 0 for a null handle.
///
/// # Safety
/// `case` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn psse_case_branch_count(case: *const PsseCase) -> usize {
    case.as_ref().map_or(0, |c| c.case.l())
}

/// Zero-based position of the reference bus.
///
/// # Safety
/// `case` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn psse_case_reference_bus(case: *const PsseCase) -> usize {
    case.as_ref().map_or(0, |c| c.case.reference_index())
}

/// Writes the voltage profile stored in the case into two length-`N` arrays.
///
/// # Safety
/// `re` and `im` must each hold `psse_case_bus_count(case)` doubles.
#[no_mangle]
pub unsafe extern "C" fn psse_case_voltages(
    case: *const PsseCase,
    re: *mut f64,
    im: *mut f64,
) -> PsseStatus {
    guard(|| {
        let c = ref_arg(case, "case")?;
        let v: Vec<Complex64> = c
            .case
            .buses
            .iter()
            .map(|b| Complex64::from_polar(b.voltage_magnitude, b.voltage_angle))
            .collect();
        write_complex(&v, re, im)
    })
}

/// Simulates every location of the given kinds at state `v` with Gaussian
/// noise of the given per-class standard deviations.
///
/// # Safety
/// `kinds` must hold `kind_count` [`PsseKind`] codes; `v_re`/`v_im` must hold
/// `n` doubles.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn psse_measurements_simulate(
    case: *const PsseCase,
    kinds: *const u32,
    kind_count: usize,
    v_re: *const f64,
    v_im: *const f64,
    n: usize,
    sigma_vsq: f64,
    sigma_flow: f64,
    sigma_injection: f64,
    seed: u64,
    out: *mut *mut PsseMeasurementSet,
) -> PsseStatus {
    guard(|| {
        let c = ref_arg(case, "case")?;
        if kinds.is_null() {
            return Err(null("kinds"));
        }
        let kinds = std::slice::from_raw_parts(kinds, kind_count)
            .iter()
            .map(|&k| kind_of(k))
            .collect::<Result<Vec<_>, _>>()?;
        let v = complex_arg(v_re, v_im, n)?;
        check_len(c.model.n(), n)?;
        let noise = NoiseSpec::by_class(sigma_vsq, sigma_flow, sigma_injection, seed)?;
        let plan = measurement::full_plan(&c.model, &kinds);
        let set = measurement::simulate(&c.model, &v, &plan, &noise)?;
        put(out, PsseMeasurementSet { set })
    })
}

/// Replaces `floor(fraction·M)` flow/injection values by Laplacian outliers.
///
/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psse_measurements_corrupt_laplacian(
    set: *const PsseMeasurementSet,
    fraction: f64,
    mean: f64,
    stddev: f64,
    seed: u64,
    out: *mut *mut PsseMeasurementSet,
) -> PsseStatus {
    guard(|| {
        let s = ref_arg(set, "set")?;
        let spec = CorruptionSpec {
            model: CorruptionModel::M1 { mean, stddev },
            fraction,
            eligible_kinds: CorruptionSpec::default_eligible(),
            seed,
        };
        put(out, PsseMeasurementSet { set: measurement::corrupt(&s.set, &spec)? })
    })
}

/// Divides every record by the spectral norm of its matrix.
///
/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psse_measurements_normalize(
    set: *const PsseMeasurementSet,
    out: *mut *mut PsseMeasurementSet,
) -> PsseStatus {
    guard(|| {
        let s = ref_arg(set, "set")?;
        put(out, PsseMeasurementSet { set: measurement::normalize(&s.set)? })
    })
}

/// Rebuilds a set from its JSON form against `case`.
///
/// # Safety
/// `json` must be a valid C string; `case` live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psse_measurements_from_json(
    case: *const PsseCase,
    json: *const c_char,
    out: *mut *mut PsseMeasurementSet,
) -> PsseStatus {
    guard(|| {
        let c = ref_arg(case, "case")?;
        let text = str_arg(json, "json")?;
        put(out, PsseMeasurementSet { set: MeasurementSet::from_json(text, &c.model)? })
    })
}

/// Serializes a set to JSON. Release the string with `psse_string_free`.
///
/// # Safety
/// `set` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn psse_measurements_to_json(
    set: *const PsseMeasurementSet,
    out: *mut *mut c_char,
) -> PsseStatus {
    guard(|| {
        let s = ref_arg(set, "set")?;
        if out.is_null() {
            return Err(null("output string"));
        }
        let text = CString::new(s.set.to_json()?)
            .map_err(|_| Failure(PsseStatus::InvalidArgument, "JSON contains NUL".into()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// Number of records `M`, or 0 for a null handle.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn psse_measurements_count(set: *const PsseMeasurementSet) -> usize {
    set.as_ref().map_or(0, |s| s.set.m())
}

/// Number of records flagged as corrupted.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn psse_measurements_corrupted_count(set: *const PsseMeasurementSet) -> usize {
    set.as_ref().map_or(0, |s| s.set.corrupted_count())
}

/// Releases a set. Null is ignored.
///
/// # Safety
/// `set` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn psse_measurements_free(set: *mut PsseMeasurementSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn psse_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Mean absolute residual of `set` at `v`.
///
/// # Safety
/// `v_re`/`v_im` must hold `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn psse_lav_objective(
    set: *const PsseMeasurementSet,
    v_re: *const f64,
    v_im: *const f64,
    n: usize,
    out: *mut f64,
) -> PsseStatus {
    guard(|| {
        let s = ref_arg(set, "set")?;
        let v = complex_arg(v_re, v_im, n)?;
        check_len(s.set.n(), n)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = s.set.lav_objective(&v);
        Ok(())
    })
}

/// Normalized RMSE after aligning both vectors to zero phase at `reference`.
///
/// # Safety
/// All four arrays must hold `n` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn psse_rmse(
    est_re: *const f64,
    est_im: *const f64,
    truth_re: *const f64,
    truth_im: *const f64,
    n: usize,
    reference: usize,
    out: *mut f64,
) -> PsseStatus {
    guard(|| {
        let est = complex_arg(est_re, est_im, n)?;
        let truth = complex_arg(truth_re, truth_im, n)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = metrics::rmse(&est, &truth, reference)?;
        Ok(())
    })
}

unsafe fn finish_solve(
    state: &[Complex64],
    iterations: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    out_iterations: *mut usize,
) -> Result<(), Failure> {
    write_complex(state, out_re, out_im)?;
    if !out_iterations.is_null() {
        *out_iterations = iterations;
    }
    Ok(())
}

/// Deterministic prox-linear solve from `v0`; writes the estimate into
/// `out_re`/`out_im` and, if non-null, the outer iteration count.
///
/// # Safety
/// Vector arguments must hold `n` doubles; `params` must be readable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn psse_solve_deterministic(
    set: *const PsseMeasurementSet,
    params: *const PsseDeterministicParams,
    v0_re: *const f64,
    v0_im: *const f64,
    n: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    out_iterations: *mut usize,
) -> PsseStatus {
    guard(|| {
        let s = ref_arg(set, "set")?;
        let p = ref_arg(params, "params")?;
        let v0 = VoltageState::new(complex_arg(v0_re, v0_im, n)?);
        let config = DeterministicConfig {
            mu: p.mu,
            rho: p.rho,
            inner_iters: p.inner_iters,
            max_outer: p.max_outer,
            tol: p.tol,
            inner_tol: None,
            l1_weight: p.l1_weight,
        };
        let sol = deterministic::solve(&s.set, &config, &v0, None)?;
        finish_solve(&sol.state, sol.trace.iterations(), out_re, out_im, out_iterations)
    })
}

/// Stochastic prox-linear solve from `v0`; the iteration count is in epochs.
///
/// # Safety
/// Vector arguments must hold `n` doubles; `params` must be readable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn psse_solve_stochastic(
    set: *const PsseMeasurementSet,
    params: *const PsseStochasticParams,
    v0_re: *const f64,
    v0_im: *const f64,
    n: usize,
    out_re: *mut f64,
    out_im: *mut f64,
    out_iterations: *mut usize,
) -> PsseStatus {
    guard(|| {
        let s = ref_arg(set, "set")?;
        let p = ref_arg(params, "params")?;
        let v0 = VoltageState::new(complex_arg(v0_re, v0_im, n)?);
        let sampling = match p.sampling {
            0 => Sampling::Uniform,
            1 => Sampling::Cyclic,
            2 => Sampling::Sequential,
            other => {
                return Err(Failure(
                    PsseStatus::InvalidArgument,
                    format!("unknown sampling mode {other}"),
                ))
            }
        };
        let config = StochasticConfig {
            alpha: p.alpha,
            beta: p.beta,
            constant_step: (p.constant_step > 0.0).then_some(p.constant_step),
            sampling,
            max_epochs: p.max_epochs,
            tol: p.tol,
            seed: p.seed,
        };
        let schedule = (p.minibatch != 0).then(|| build_minibatches(&s.set));
        let sol = stochastic::solve(&s.set, &config, schedule.as_ref(), &v0, None)?;
        finish_solve(&sol.state, sol.trace.iterations(), out_re, out_im, out_iterations)
    })
}
