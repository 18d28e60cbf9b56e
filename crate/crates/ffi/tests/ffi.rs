use std::ffi::{CStr, CString};
use std::ptr;

use pmnn_ffi::*;

const SMALL: &str = r#"
name = "tiny"

[problem]
operator = "neg-laplacian"
dim = 1
boundary = { kind = "dirichlet" }

[architecture]
layer_sizes = [1, 8, 8, 1]

[training]
method = "ipmnn"
n_samples = 200
epochs = 300

[exact]
kind = "sine-product"
modes = [1]

[outputs]
histogram_bins = 20
density_points = 2000
heldout_points = 200
"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pmnn_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn run_from_toml_and_query() {
    let tmp = tempfile::tempdir().unwrap();
    let toml = CString::new(SMALL).unwrap();
    let out_dir = CString::new(tmp.path().to_str().unwrap()).unwrap();
    let mut run = ptr::null_mut();
    let rc = unsafe { pmnn_run_config(toml.as_ptr(), ptr::null(), out_dir.as_ptr(), &mut run) };
    assert_eq!(rc, PMNN_OK, "{}", last_error());
    assert!(!run.is_null());

    let mut lambda = 0.0;
    assert_eq!(unsafe { pmnn_run_lambda(run, &mut lambda) }, PMNN_OK);
    assert!(lambda.is_finite() && lambda > 0.0);
    let mut rel = 0.0;
    assert_eq!(unsafe { pmnn_run_relative_error(run, &mut rel) }, PMNN_OK);
    assert!((rel - (lambda - std::f64::consts::PI.powi(2)).abs() / std::f64::consts::PI.powi(2)).abs() < 1e-15);
    let mut dim = 0usize;
    assert_eq!(unsafe { pmnn_run_dim(run, &mut dim) }, PMNN_OK);
    assert_eq!(dim, 1);

    let points = [0.0, 0.25, 0.5, 1.0];
    let mut values = [f64::NAN; 4];
    let rc = unsafe { pmnn_run_eigenfunction(run, points.as_ptr(), 4, 1, values.as_mut_ptr()) };
    assert_eq!(rc, PMNN_OK, "{}", last_error());
    assert_eq!(values[0], 0.0);
    assert!(values[3].abs() < 1e-12);
    assert!(values[1].is_finite() && values[2].abs() > 0.0);

    let rc = unsafe { pmnn_run_eigenfunction(run, points.as_ptr(), 2, 2, values.as_mut_ptr()) };
    assert_eq!(rc, PMNN_ERR_ARGUMENT);
    assert!(last_error().contains("expected 1"));

    unsafe { pmnn_run_free(run) };
    assert!(tmp.path().join("tiny").join("report.json").is_file());
}

#[test]
fn null_and_bad_inputs() {
    let mut run = ptr::null_mut();
    assert_eq!(
        unsafe { pmnn_run_config(ptr::null(), ptr::null(), ptr::null(), &mut run) },
        PMNN_ERR_NULL
    );
    assert!(last_error().contains("toml"));
    let bad = CString::new("name = 3").unwrap();
    assert_eq!(
        unsafe { pmnn_run_config(bad.as_ptr(), ptr::null(), ptr::null(), &mut run) },
        PMNN_ERR_CONFIG
    );
    assert!(run.is_null());
    let name = CString::new("no-such-run").unwrap();
    assert_eq!(
        unsafe { pmnn_run_registry(name.as_ptr(), ptr::null(), ptr::null(), -1, &mut run) },
        PMNN_ERR_CONFIG
    );
    assert!(last_error().contains("no-such-run"));
    let sweep = CString::new("fdm-sweep").unwrap();
    assert_eq!(
        unsafe { pmnn_run_registry(sweep.as_ptr(), ptr::null(), ptr::null(), -1, &mut run) },
        PMNN_ERR_CONFIG
    );
    let mut x = 0.0;
    assert_eq!(unsafe { pmnn_run_lambda(ptr::null(), &mut x) }, PMNN_ERR_NULL);
    unsafe { pmnn_run_free(ptr::null_mut()) };
}

#[test]
fn invalid_config_reports_width() {
    let text = SMALL.replace("[1, 8, 8, 1]", "[3, 8, 8, 1]");
    let toml = CString::new(text).unwrap();
    let mut run = ptr::null_mut();
    assert_eq!(
        unsafe { pmnn_run_config(toml.as_ptr(), ptr::null(), ptr::null(), &mut run) },
        PMNN_ERR_CONFIG
    );
    assert!(last_error().contains("expected 1"), "{}", last_error());
}

#[test]
fn fdm_eigenvalue_matches_closed_form() {
    for n_h in [8usize, 16, 31] {
        let h = 1.0 / (n_h + 1) as f64;
        let one_d = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
        let mut l1 = 0.0;
        assert_eq!(unsafe { pmnn_fdm_ground_eigenvalue(1, n_h, &mut l1) }, PMNN_OK);
        assert!((l1 - one_d).abs() < 1e-9 * one_d);
        let mut l2 = 0.0;
        assert_eq!(unsafe { pmnn_fdm_ground_eigenvalue(2, n_h, &mut l2) }, PMNN_OK);
        assert!((l2 - 2.0 * one_d).abs() < 1e-9 * one_d);
    }
    let mut x = 0.0;
    assert_eq!(unsafe { pmnn_fdm_ground_eigenvalue(3, 8, &mut x) }, PMNN_ERR_ARGUMENT);
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/pmnn.h")).unwrap();
    for sym in [
        "pmnn_last_error",
        "pmnn_run_registry",
        "pmnn_run_config",
        "pmnn_run_lambda",
        "pmnn_run_relative_error",
        "pmnn_run_dim",
        "pmnn_run_eigenfunction",
        "pmnn_fdm_ground_eigenvalue",
        "pmnn_run_free",
        "typedef struct PmnnRun PmnnRun",
    ] {
        assert!(header.contains(sym), "{sym}");
    }
}
