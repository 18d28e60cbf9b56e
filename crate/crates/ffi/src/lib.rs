//! C interface to the pmnn eigensolvers.
//!
//! Every fallible function returns a status code; `PMNN_OK` is zero and the
//! failures are negative. The message of the most recent failure on the
//! calling thread is available from [`pmnn_last_error`]. Trained runs are
//! opaque [`PmnnRun`] handles released with [`pmnn_run_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use pmnn::harness::{self, registry, ExperimentConfig, RegistryEntry, RunReport};
use pmnn::network::Mlp;
use pmnn::problems::BoundarySpec;
use pmnn::Error;

pub const PMNN_OK: i32 = 0;
pub const PMNN_ERR_NULL: i32 = -1;
pub const PMNN_ERR_UTF8: i32 = -2;
pub const PMNN_ERR_CONFIG: i32 = -3;
pub const PMNN_ERR_NUMERIC: i32 = -4;
pub const PMNN_ERR_IO: i32 = -5;
pub const PMNN_ERR_UNAVAILABLE: i32 = -6;
pub const PMNN_ERR_ARGUMENT: i32 = -7;
pub const PMNN_ERR_PANIC: i32 = -8;

/// A finished training run.
pub struct PmnnRun {
    report: RunReport,
    mlp: Mlp,
    bc: BoundarySpec,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code_for(e: &Error) -> i32 {
    match e {
        Error::Config(_)
        | Error::UnknownExperiment(_)
        | Error::InvalidLayers(_)
        | Error::TomlDe(_)
        | Error::TomlSer(_)
        | Error::ParamOutOfRange { .. } => PMNN_ERR_CONFIG,
        Error::Degenerate(_) | Error::DegenerateEpoch { .. } | Error::NonFinite { .. } | Error::Singular(_) => {
            PMNN_ERR_NUMERIC
        }
        Error::Io(_) | Error::Json(_) | Error::Checkpoint(_) | Error::ArtifactExists(_) => PMNN_ERR_IO,
        _ => PMNN_ERR_ARGUMENT,
    }
}

enum Failure {
    Code(i32, String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PMNN_OK,
        Ok(Err(Failure::Code(code, msg))) => {
            set_error(&msg);
            code
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            code_for(&e)
        }
        Err(_) => {
            set_error("internal panic");
            PMNN_ERR_PANIC
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Code(PMNN_ERR_NULL, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Code(PMNN_ERR_UTF8, format!("{what} is not valid UTF-8")))
}

unsafe fn opt_str<'a>(p: *const c_char, what: &str, default: &'a str) -> Result<&'a str, Failure> {
    if p.is_null() {
        Ok(default)
    } else {
        read_str(p, what)
    }
}

fn null(what: &str) -> Failure {
    Failure::Code(PMNN_ERR_NULL, format!("{what} is null"))
}

fn train(config: ExperimentConfig, out_dir: &str) -> Result<Box<PmnnRun>, Failure> {
    let report = harness::run(&config, &PathBuf::from(out_dir))?;
    let mlp = Mlp::load(&report.artifacts.checkpoint)?;
    let bc = config.problem()?.bc;
    Ok(Box::new(PmnnRun { report, mlp, bc }))
}

/// Message of the last failure on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pmnn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Trains a registry experiment. `profile` and `out_dir` may be null for
/// `"full"` and `"runs"`. A negative `seed` keeps the configured seed.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmnn_run_registry(
    name: *const c_char,
    profile: *const c_char,
    out_dir: *const c_char,
    seed: i64,
    out: *mut *mut PmnnRun,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let name = read_str(name, "name")?;
        let profile = opt_str(profile, "profile", harness::FULL_PROFILE)?;
        let out_dir = opt_str(out_dir, "out_dir", "runs")?;
        let mut config = match registry::lookup(name)? {
            RegistryEntry::Experiment(c) => c.with_profile(profile)?,
            RegistryEntry::Sweep(_) => {
                return Err(Failure::Code(
                    PMNN_ERR_CONFIG,
                    format!("`{name}` is a sweep, not an experiment"),
                ))
            }
        };
        if seed >= 0 {
            config.training.seed = seed as u64;
        }
        *out = Box::into_raw(train(config, out_dir)?);
        Ok(())
    })
}

/// Trains an experiment described by TOML text.
///
/// # Safety
/// As for [`pmnn_run_registry`].
#[no_mangle]
pub unsafe extern "C" fn pmnn_run_config(
    toml: *const c_char,
    profile: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut PmnnRun,
) -> i32 {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let text = read_str(toml, "toml")?;
        let profile = opt_str(profile, "profile", harness::FULL_PROFILE)?;
        let out_dir = opt_str(out_dir, "out_dir", "runs")?;
        let config = ExperimentConfig::from_toml(text)?.with_profile(profile)?;
        *out = Box::into_raw(train(config, out_dir)?);
        Ok(())
    })
}

/// Estimated eigenvalue of the unshifted operator.
///
/// # Safety
/// `run` must come from this library and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmnn_run_lambda(run: *const PmnnRun, out: *mut f64) -> i32 {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = run.report.lambda;
        Ok(())
    })
}

/// Relative eigenvalue error; `PMNN_ERR_UNAVAILABLE` without a reference.
///
/// # Safety
/// As for [`pmnn_run_lambda`].
#[no_mangle]
pub unsafe extern "C" fn pmnn_run_relative_error(run: *const PmnnRun, out: *mut f64) -> i32 {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = run
            .report
            .relative_error
            .ok_or_else(|| Failure::Code(PMNN_ERR_UNAVAILABLE, "no exact eigenvalue".into()))?;
        Ok(())
    })
}

/// Spatial dimension of the run's problem.
///
/// # Safety
/// As for [`pmnn_run_lambda`].
#[no_mangle]
pub unsafe extern "C" fn pmnn_run_dim(run: *const PmnnRun, out: *mut usize) -> i32 {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = run.report.config.problem.dim;
        Ok(())
    })
}

/// Evaluates the trained eigenfunction (unnormalized) at `n` row-major
/// points of width `dim`, writing `n` values into `values`.
///
/// # Safety
/// `points` must hold `n * dim` doubles and `values` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn pmnn_run_eigenfunction(
    run: *const PmnnRun,
    points: *const f64,
    n: usize,
    dim: usize,
    values: *mut f64,
) -> i32 {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if points.is_null() {
            return Err(null("points"));
        }
        if values.is_null() {
            return Err(null("values"));
        }
        let expected = run.report.config.problem.dim;
        if dim != expected {
            return Err(Failure::Code(
                PMNN_ERR_ARGUMENT,
                format!("points have width {dim}, expected {expected}"),
            ));
        }
        let coords = std::slice::from_raw_parts(points, n * dim);
        let u = harness::evaluate_flat(&run.mlp, &run.bc, coords, dim)?;
        std::slice::from_raw_parts_mut(values, n).copy_from_slice(&u);
        Ok(())
    })
}

/// Smallest eigenvalue of the finite-difference `-Δ` on the unit square or
/// interval with `n_h` interior nodes per axis, by inverse iteration.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pmnn_fdm_ground_eigenvalue(dim: usize, n_h: usize, out: *mut f64) -> i32 {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = pmnn::fdm::fdm_reference_error(dim, n_h)?.lambda;
        Ok(())
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must be null or an unreleased handle from this library.
#[no_mangle]
pub unsafe extern "C" fn pmnn_run_free(run: *mut PmnnRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
