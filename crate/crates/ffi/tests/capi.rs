use std::ffi::{CStr, CString};
use std::ptr;

use opspread_ffi::*;

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = ops_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

fn parsed(text: &str) -> *mut OpsConfig {
    let mut cfg = ptr::null_mut();
    let text = cstr(text);
    assert_eq!(unsafe { ops_config_parse(text.as_ptr(), &mut cfg) }, OpsStatus::Ok);
    cfg
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(ops_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_point_exposes_rows() {
    let cfg = parsed("model = tki\nsites = 2\nensemble_size = 4\nseed = 3\ncheckpoint_stride = 8\n");
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { ops_run_point(cfg, 0, 1.4, &mut run) }, OpsStatus::Ok);
    let mut rows = 0;
    assert_eq!(unsafe { ops_run_row_count(run, &mut rows) }, OpsStatus::Ok);
    // horizon 2d² = 32 at stride 8
    assert_eq!(rows, 4);
    let mut row = OpsMetricsRow {
        n: 0,
        mean_fidelity: 0.0,
        fidelity_stderr: 0.0,
        entropy: 0.0,
        fisher: 0.0,
        rank: 0,
        trace_invcov: 0.0,
        log_inv_volume: 0.0,
        unconverged: 0,
    };
    assert_eq!(unsafe { ops_run_row(run, rows - 1, &mut row) }, OpsStatus::Ok);
    assert_eq!(row.n, 32);
    assert_eq!(row.rank, 13);
    assert!(row.mean_fidelity > 0.99 && row.mean_fidelity <= 1.0 + 1e-12);
    assert_eq!(unsafe { ops_run_row(run, rows, &mut row) }, OpsStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));
    unsafe {
        ops_run_free(run);
        ops_config_free(cfg);
    }
}

#[test]
fn krylov_chain_reports_size_before_copying() {
    let cfg = parsed("model = ti\nsites = 2\nobservable = s1y\nseed = 1\n");
    let mut dim = 0;
    let mut len = 0;
    let status = unsafe { ops_krylov_chain(cfg, 1.4, &mut dim, ptr::null_mut(), 0, &mut len) };
    assert_eq!(status, OpsStatus::BufferTooSmall);
    assert_eq!(len, dim - 1);
    let mut buf = vec![0.0; len];
    let status = unsafe { ops_krylov_chain(cfg, 1.4, &mut dim, buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(status, OpsStatus::Ok);
    assert!(buf.iter().all(|&b| b > 0.0));
    unsafe { ops_config_free(cfg) };
}

#[test]
fn floquet_models_have_no_krylov_chain() {
    let cfg = parsed("model = tki\nsites = 2\nseed = 1\n");
    let mut dim = 0;
    let status = unsafe { ops_krylov_chain(cfg, 1.4, &mut dim, ptr::null_mut(), 0, ptr::null_mut()) };
    assert_eq!(status, OpsStatus::InvalidArgument);
    assert!(last_error().contains("no Hamiltonian"));
    unsafe { ops_config_free(cfg) };
}

#[test]
fn errors_map_to_status_codes() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { ops_config_new(&mut cfg) }, OpsStatus::Ok);
    let (k, v) = (cstr("no_such_key"), cstr("1"));
    assert_eq!(unsafe { ops_config_set(cfg, k.as_ptr(), v.as_ptr()) }, OpsStatus::Config);
    assert!(last_error().contains("no_such_key"));
    // default config has no seed
    assert_eq!(unsafe { ops_config_validate(cfg) }, OpsStatus::Config);
    let (k, v) = (cstr("seed"), cstr("5"));
    assert_eq!(unsafe { ops_config_set(cfg, k.as_ptr(), v.as_ptr()) }, OpsStatus::Ok);
    assert_eq!(unsafe { ops_config_validate(cfg) }, OpsStatus::Ok);
    assert_eq!(unsafe { ops_config_set(ptr::null_mut(), k.as_ptr(), v.as_ptr()) }, OpsStatus::NullPointer);
    assert_eq!(unsafe { ops_config_parse(ptr::null(), &mut cfg) }, OpsStatus::NullPointer);
    unsafe {
        ops_config_free(cfg);
        ops_config_free(ptr::null_mut());
        ops_run_free(ptr::null_mut());
    }
}

#[test]
fn experiment_writes_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parsed("model = goe\nsites = 2\nsweep = sample\nvalues = 0, 1\nensemble_size = 2\nseed = 9\nkrylov = true\n");
    let out = cstr(dir.path().to_str().unwrap());
    assert_eq!(unsafe { ops_run_experiment(cfg, out.as_ptr()) }, OpsStatus::Ok);
    for f in ["metrics.csv", "krylov_b.csv", "krylov_profile.csv", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    unsafe { ops_config_free(cfg) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/opspread.h")).unwrap();
    for name in ["ops_config_parse", "ops_run_point", "ops_run_lanczos_b", "ops_last_error_message", "OPS_STATUS_BUFFER_TOO_SMALL", "typedef struct OpsConfig"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
