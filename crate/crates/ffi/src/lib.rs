//! C ABI over the `opspread` library.
//!
//! Objects cross the boundary as opaque handles created and destroyed by
//! this library. Every entry point returns an [`OpsStatus`]; on failure the
//! message is kept per thread and read with [`ops_last_error_message`].
//! Panics are caught at the boundary and reported as [`OpsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use opspread::cli::{self, ExperimentConfig, PointOutput};
use opspread::krylov;
use opspread::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numeric = 4,
    Io = 5,
    /// Output buffer too small; the required length was still written.
    BufferTooSmall = 6,
    Panic = 7,
}

/// Experiment configuration handle.
pub struct OpsConfig {
    inner: ExperimentConfig,
}

/// Results of one sweep point.
pub struct OpsRun {
    inner: PointOutput,
}

/// One checkpoint of the information-gain time series. Fidelity fields are
/// NaN when the fidelity metric is disabled.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OpsMetricsRow {
    pub n: usize,
    pub mean_fidelity: f64,
    pub fidelity_stderr: f64,
    pub entropy: f64,
    pub fisher: f64,
    pub rank: usize,
    pub trace_invcov: f64,
    pub log_inv_volume: f64,
    pub unconverged: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let text = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn status_of(err: &Error) -> OpsStatus {
    match err {
        Error::Config(_) | Error::MissingColumns(_) => OpsStatus::Config,
        Error::InvalidParameter(_)
        | Error::InvalidDimension(_)
        | Error::DimensionMismatch { .. }
        | Error::HorizonTooLong { .. } => OpsStatus::InvalidArgument,
        Error::Io(_) => OpsStatus::Io,
        _ => OpsStatus::Numeric,
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (OpsStatus, String)>) -> OpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OpsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("panic: {msg}"));
            OpsStatus::Panic
        }
    }
}

fn lib(err: Error) -> (OpsStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (OpsStatus, String) {
    (OpsStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` is null or a NUL-terminated string valid for reads.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (OpsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (OpsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// # Safety
/// `p` is null or points to a live value of type `T`.
unsafe fn read_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (OpsStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `out` is null or valid for writing one pointer.
unsafe fn write_handle<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Copies `src` into `buf[..cap]`, writing the full length to `len`.
///
/// # Safety
/// `buf` is valid for `cap` writes (or `cap == 0`); `len` is null or valid.
unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, len: *mut usize) -> Result<(), (OpsStatus, String)> {
    if !len.is_null() {
        *len = src.len();
    }
    if cap < src.len() {
        return Err((OpsStatus::BufferTooSmall, format!("buffer holds {cap} values, {} needed", src.len())));
    }
    if !src.is_empty() {
        if buf.is_null() {
            return Err(null("buffer"));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    }
    Ok(())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ops_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ops_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// New configuration with default values; the seed must still be set.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn ops_config_new(out: *mut *mut OpsConfig) -> OpsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        write_handle(out, OpsConfig { inner: ExperimentConfig::default() });
        Ok(())
    })
}

/// Parses `key = value` config text.
///
/// # Safety
/// `text` is a NUL-terminated string; `out` is valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn ops_config_parse(text: *const c_char, out: *mut *mut OpsConfig) -> OpsStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = ExperimentConfig::parse_text(text).map_err(lib)?;
        write_handle(out, OpsConfig { inner });
        Ok(())
    })
}

/// Sets one key, with the same names and syntax as the config file.
///
/// # Safety
/// `cfg` is a live handle; `key` and `value` are NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ops_config_set(cfg: *mut OpsConfig, key: *const c_char, value: *const c_char) -> OpsStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let key = read_str(key, "key")?;
        let value = read_str(value, "value")?;
        cfg.inner.set(key, value).map_err(lib)
    })
}

/// Checks the configuration without running it.
///
/// # Safety
/// `cfg` is a live handle.
#[no_mangle]
pub unsafe extern "C" fn ops_config_validate(cfg: *const OpsConfig) -> OpsStatus {
    guard(|| read_ref(cfg, "cfg")?.inner.validate().map_err(lib))
}

/// # Safety
/// `cfg` is null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ops_config_free(cfg: *mut OpsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the sweep point `index` at parameter `value` in memory.
///
/// # Safety
/// `cfg` is a live handle; `out` is valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn ops_run_point(cfg: *const OpsConfig, index: usize, value: f64, out: *mut *mut OpsRun) -> OpsStatus {
    guard(|| {
        let cfg = read_ref(cfg, "cfg")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = cli::run_point(&cfg.inner, index, value).map_err(lib)?;
        write_handle(out, OpsRun { inner });
        Ok(())
    })
}

/// Runs the whole sweep and writes CSV and manifest files into `out_dir`.
///
/// # Safety
/// `cfg` is a live handle; `out_dir` is a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn ops_run_experiment(cfg: *const OpsConfig, out_dir: *const c_char) -> OpsStatus {
    guard(|| {
        let cfg = read_ref(cfg, "cfg")?;
        let dir = read_str(out_dir, "out_dir")?;
        cli::run_experiment(&cfg.inner, Path::new(dir)).map(|_| ()).map_err(lib)
    })
}

/// Number of checkpoints in a run.
///
/// # Safety
/// `run` is a live handle; `len` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ops_run_row_count(run: *const OpsRun, len: *mut usize) -> OpsStatus {
    guard(|| {
        let run = read_ref(run, "run")?;
        let len = len.as_mut().ok_or_else(|| null("len"))?;
        *len = run.inner.rows.len();
        Ok(())
    })
}

/// Checkpoint `i` of a run.
///
/// # Safety
/// `run` is a live handle; `row` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ops_run_row(run: *const OpsRun, i: usize, row: *mut OpsMetricsRow) -> OpsStatus {
    guard(|| {
        let run = read_ref(run, "run")?;
        let row = row.as_mut().ok_or_else(|| null("row"))?;
        let r = run
            .inner
            .rows
            .get(i)
            .ok_or_else(|| (OpsStatus::InvalidArgument, format!("row {i} out of range")))?;
        *row = OpsMetricsRow {
            n: r.n,
            mean_fidelity: r.mean_fidelity,
            fidelity_stderr: r.fidelity_stderr,
            entropy: r.entropy,
            fisher: r.fisher,
            rank: r.rank,
            trace_invcov: r.trace_invcov,
            log_inv_volume: r.log_inv_volume,
            unconverged: run.inner.unconverged[i],
        };
        Ok(())
    })
}

/// Lanczos coefficients `b_1 … b_{K−1}` of a run with Krylov output. With
/// `cap` too small, `len` still receives the count and
/// [`OpsStatus::BufferTooSmall`] is returned.
///
/// # Safety
/// `run` is a live handle; `buf` is valid for `cap` writes; `len` is null or
/// valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ops_run_lanczos_b(run: *const OpsRun, buf: *mut f64, cap: usize, len: *mut usize) -> OpsStatus {
    guard(|| copy_out(&read_ref(run, "run")?.inner.krylov_b, buf, cap, len))
}

/// Krylov dimension `K` of a run; 0 when Krylov output was not requested.
///
/// # Safety
/// `run` is a live handle; `dim` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn ops_run_krylov_dim(run: *const OpsRun, dim: *mut usize) -> OpsStatus {
    guard(|| {
        let run = read_ref(run, "run")?;
        *dim.as_mut().ok_or_else(|| null("dim"))? = run.inner.krylov_dim.unwrap_or(0);
        Ok(())
    })
}

/// # Safety
/// `run` is null or a handle from this library, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ops_run_free(run: *mut OpsRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Krylov chain of the configured observable under the configured
/// time-independent Hamiltonian at parameter `value`, without tomography.
/// Coefficients are written as in [`ops_run_lanczos_b`].
///
/// # Safety
/// `cfg` is a live handle; `dim` is valid for one write; `buf`/`len` as in
/// [`ops_run_lanczos_b`].
#[no_mangle]
pub unsafe extern "C" fn ops_krylov_chain(
    cfg: *const OpsConfig,
    value: f64,
    dim: *mut usize,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> OpsStatus {
    guard(|| {
        let cfg = &read_ref(cfg, "cfg")?.inner;
        let dim = dim.as_mut().ok_or_else(|| null("dim"))?;
        if !cfg.model.time_independent() {
            return Err((OpsStatus::InvalidArgument, format!("model {} has no Hamiltonian", cfg.model.name())));
        }
        let dynamics = cli::build_dynamics(cfg, value).map_err(lib)?;
        let h = dynamics.hamiltonian.expect("time-independent model");
        let obs = cli::build_observable(cfg).map_err(lib)?;
        let lv = krylov::liouvillian(&h).map_err(lib)?;
        let data = krylov::krylov_chain(&lv, &obs.matrix, cfg.zero_tol).map_err(lib)?;
        *dim = data.dim();
        copy_out(data.lanczos_b(), buf, cap, len)
    })
}
