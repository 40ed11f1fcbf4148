//! C ABI for the stickyflow simulator.
//!
//! Objects cross the boundary as opaque handles created by `sf_*_new`-style
//! functions and released with the matching `sf_*_free`. Every fallible
//! function returns an [`SfStatus`]; on failure the message is available from
//! [`sf_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use stickyflow::harness::verify;
use stickyflow::io::{parse_config, write_trajectory, RunConfig};
use stickyflow::selfsimilar::{integrate_sigma, Classification, SelfSimilarSolution};
use stickyflow::stepper::{run, Trajectory};
use stickyflow::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed or out-of-range configuration.
    Config = 3,
    /// Invalid data or parameters, or a failed solve.
    Numerical = 4,
    Io = 5,
    /// Index or time outside the valid range.
    OutOfRange = 6,
    /// The run stopped early; the trajectory is still returned.
    Aborted = 7,
    /// A check failed in `sf_verify`; the report is still returned.
    CheckFailed = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfClassification {
    LargeEnergy = 0,
    SmallEnergy = 1,
}

/// One diagnostics row. Quantities that do not apply to the run are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SfRecord {
    pub t: f64,
    pub kinetic: f64,
    pub thermal: f64,
    pub momentum: f64,
    pub domain_size: f64,
    pub etax_min: f64,
    pub etax_max: f64,
    pub log_identity_residual: f64,
    pub h1_v: f64,
    pub l2_vt: f64,
    pub h2_eta: f64,
    pub apriori_nsf: f64,
}

/// Parsed run configuration.
pub struct SfConfig(RunConfig);

/// Output of a run.
pub struct SfTrajectory(Trajectory);

/// Integrated self-similar scale factor.
pub struct SfSelfSimilar(SelfSimilarSolution);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: SfStatus, message: impl Into<String>) -> SfStatus {
    set_error(message);
    status
}

fn status_of(err: &Error) -> SfStatus {
    match err {
        Error::Config { .. } => SfStatus::Config,
        Error::Io { .. } => SfStatus::Io,
        Error::OutsideHorizon { .. } | Error::OutOfDomain(_) => SfStatus::OutOfRange,
        _ => SfStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<SfStatus, SfStatus>) -> SfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) | Ok(Err(s)) => s,
        Err(_) => fail(SfStatus::Panic, "internal panic"),
    }
}

fn check(err: Error) -> SfStatus {
    fail(status_of(&err), err.to_string())
}

unsafe fn text<'a>(s: *const c_char) -> Result<&'a str, SfStatus> {
    if s.is_null() {
        return Err(fail(SfStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(s).to_str().map_err(|_| fail(SfStatus::InvalidUtf8, "string is not UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, SfStatus> {
    p.as_ref().ok_or_else(|| fail(SfStatus::NullPointer, "null handle"))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, SfStatus> {
    p.as_mut().ok_or_else(|| fail(SfStatus::NullPointer, "null output pointer"))
}

fn into_raw_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn sf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a configuration from INI text.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out_config` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_config_parse(source: *const c_char, out_config: *mut *mut SfConfig) -> SfStatus {
    guard(|| {
        let slot = out(out_config)?;
        *slot = ptr::null_mut();
        let config = parse_config(text(source)?).map_err(check)?;
        *slot = Box::into_raw(Box::new(SfConfig(config)));
        Ok(SfStatus::Ok)
    })
}

/// Sets one dotted key, e.g. `grid.n_cells`, from its text value.
///
/// # Safety
/// `config` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sf_config_set(config: *mut SfConfig, key: *const c_char, value: *const c_char) -> SfStatus {
    guard(|| {
        let config = out(config)?;
        let (key, value) = (text(key)?, text(value)?);
        config.0.set(key, value).map_err(check)?;
        Ok(SfStatus::Ok)
    })
}

/// The configuration written back as INI text; free with `sf_string_free`.
///
/// # Safety
/// `config` must be a live handle and `out_text` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_config_echo(config: *const SfConfig, out_text: *mut *mut c_char) -> SfStatus {
    guard(|| {
        let slot = out(out_text)?;
        *slot = into_raw_string(handle(config)?.0.echo());
        Ok(SfStatus::Ok)
    })
}

/// # Safety
/// `config` must be NULL or a handle from `sf_config_parse`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sf_config_free(config: *mut SfConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the simulation. An aborted run still produces a trajectory and
/// returns `SF_STATUS_ABORTED`.
///
/// # Safety
/// `config` must be a live handle and `out_traj` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_run(config: *const SfConfig, out_traj: *mut *mut SfTrajectory) -> SfStatus {
    guard(|| {
        let slot = out(out_traj)?;
        *slot = ptr::null_mut();
        let traj = run(&handle(config)?.0).map_err(check)?;
        let status = match &traj.outcome {
            stickyflow::stepper::RunOutcome::Completed => SfStatus::Ok,
            stickyflow::stepper::RunOutcome::Aborted { t, reason } => {
                fail(SfStatus::Aborted, format!("aborted at t = {t}: {reason}"))
            }
        };
        *slot = Box::into_raw(Box::new(SfTrajectory(traj)));
        Ok(status)
    })
}

/// Runs the verification checklist and returns the report text. Returns
/// `SF_STATUS_CHECK_FAILED` if any check failed.
///
/// # Safety
/// `config` must be a live handle and `out_report` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_verify(config: *const SfConfig, out_report: *mut *mut c_char) -> SfStatus {
    guard(|| {
        let slot = out(out_report)?;
        *slot = ptr::null_mut();
        let v = verify(&handle(config)?.0).map_err(check)?;
        *slot = into_raw_string(v.report.to_string());
        if v.report.passed() {
            Ok(SfStatus::Ok)
        } else {
            Ok(fail(SfStatus::CheckFailed, format!("{} checks failed", v.report.failures())))
        }
    })
}

/// Number of diagnostics rows, 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_len(traj: *const SfTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.records.len())
}

/// # Safety
/// `traj` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_completed(traj: *const SfTrajectory) -> bool {
    traj.as_ref().is_some_and(|t| t.0.completed())
}

/// # Safety
/// `traj` must be a live handle and `out_record` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_record(traj: *const SfTrajectory, index: usize, out_record: *mut SfRecord) -> SfStatus {
    guard(|| {
        let records = &handle(traj)?.0.records;
        let slot = out(out_record)?;
        let r = records
            .get(index)
            .ok_or_else(|| fail(SfStatus::OutOfRange, format!("record {index} of {}", records.len())))?;
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *slot = SfRecord {
            t: r.t,
            kinetic: r.kinetic,
            thermal: nan(r.thermal),
            momentum: r.momentum,
            domain_size: r.domain_size,
            etax_min: r.etax_min,
            etax_max: r.etax_max,
            log_identity_residual: nan(r.log_identity_residual),
            h1_v: r.h1_v,
            l2_vt: r.l2_vt,
            h2_eta: r.h2_eta,
            apriori_nsf: nan(r.apriori_nsf),
        };
        Ok(SfStatus::Ok)
    })
}

/// Copies the final flow map `eta` at the grid nodes into `buf`. Call with
/// `buf` NULL to query the length through `out_len`.
///
/// # Safety
/// `traj` must be a live handle, `out_len` writable, and `buf` NULL or valid
/// for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_final_eta(
    traj: *const SfTrajectory,
    buf: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> SfStatus {
    guard(|| {
        let eta = &handle(traj)?.0.final_state.eta;
        *out(out_len)? = eta.len();
        if buf.is_null() {
            return Ok(SfStatus::Ok);
        }
        if capacity < eta.len() {
            return Err(fail(SfStatus::OutOfRange, format!("buffer holds {capacity}, need {}", eta.len())));
        }
        ptr::copy_nonoverlapping(eta.as_ptr(), buf, eta.len());
        Ok(SfStatus::Ok)
    })
}

/// Writes the diagnostics as CSV.
///
/// # Safety
/// `traj` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_write_csv(traj: *const SfTrajectory, path: *const c_char) -> SfStatus {
    guard(|| {
        let traj = handle(traj)?;
        write_trajectory(&traj.0.records, Path::new(text(path)?)).map_err(check)?;
        Ok(SfStatus::Ok)
    })
}

/// # Safety
/// `traj` must be NULL or a handle from `sf_run`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sf_trajectory_free(traj: *mut SfTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Integrates the scale factor on `[0, t_end]`. A collapse before `t_end`
/// is not an error; see `sf_selfsimilar_collapse`.
///
/// # Safety
/// `out_solution` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_selfsimilar_integrate(
    alpha: f64,
    sigma0: f64,
    dsigma0: f64,
    t_end: f64,
    tol: f64,
    out_solution: *mut *mut SfSelfSimilar,
) -> SfStatus {
    guard(|| {
        let slot = out(out_solution)?;
        *slot = ptr::null_mut();
        let sol = integrate_sigma(alpha, sigma0, dsigma0, t_end, tol).map_err(check)?;
        *slot = Box::into_raw(Box::new(SfSelfSimilar(sol)));
        Ok(SfStatus::Ok)
    })
}

/// `sigma(t)` and `sigma'(t)`; either output may be NULL.
///
/// # Safety
/// `solution` must be a live handle; non-NULL outputs writable.
#[no_mangle]
pub unsafe extern "C" fn sf_selfsimilar_eval(
    solution: *const SfSelfSimilar,
    t: f64,
    out_sigma: *mut f64,
    out_dsigma: *mut f64,
) -> SfStatus {
    guard(|| {
        let (sigma, dsigma) = handle(solution)?.0.at(t).map_err(check)?;
        if let Some(s) = out_sigma.as_mut() {
            *s = sigma;
        }
        if let Some(d) = out_dsigma.as_mut() {
            *d = dsigma;
        }
        Ok(SfStatus::Ok)
    })
}

/// # Safety
/// `solution` must be a live handle and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn sf_selfsimilar_summary(
    solution: *const SfSelfSimilar,
    out_gamma: *mut f64,
    out_class: *mut SfClassification,
    out_limit: *mut f64,
) -> SfStatus {
    guard(|| {
        let sol = &handle(solution)?.0;
        *out(out_gamma)? = sol.gamma;
        *out(out_class)? = match sol.classification {
            Classification::LargeEnergy => SfClassification::LargeEnergy,
            Classification::SmallEnergy => SfClassification::SmallEnergy,
        };
        *out(out_limit)? = sol.limit;
        Ok(SfStatus::Ok)
    })
}

/// End of the integrated interval and the collapse time, or NaN when the
/// scale factor stayed positive.
///
/// # Safety
/// `solution` must be a live handle and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn sf_selfsimilar_horizon(
    solution: *const SfSelfSimilar,
    out_t_end: *mut f64,
    out_collapse: *mut f64,
) -> SfStatus {
    guard(|| {
        let sol = &handle(solution)?.0;
        *out(out_t_end)? = sol.t_end();
        *out(out_collapse)? = sol.collapse.unwrap_or(f64::NAN);
        Ok(SfStatus::Ok)
    })
}

/// # Safety
/// `solution` must be NULL or a handle from `sf_selfsimilar_integrate`, freed once.
#[no_mangle]
pub unsafe extern "C" fn sf_selfsimilar_free(solution: *mut SfSelfSimilar) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}
