use std::fs;

use pmnn::harness::{self, registry, ExperimentConfig, RunReport, SweepConfig, DESK_PROFILE};
use pmnn::Error;

const TINY: &str = r#"
name = "tiny-ipmnn"

[problem]
operator = "neg-laplacian"
dim = 1
boundary = { kind = "dirichlet" }

[architecture]
layer_sizes = [1, 10, 10, 1]

[training]
method = "ipmnn"
n_samples = 300
epochs = 1500
record_every = 50

[exact]
kind = "sine-product"
modes = [1]

[outputs]
histogram_bins = 30
density_points = 5000
heldout_points = 400

[profiles.desk]
epochs = 40
"#;

fn tiny() -> ExperimentConfig {
    ExperimentConfig::from_toml(TINY).unwrap()
}

fn lines(path: &std::path::Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn short_run_writes_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let report = harness::run(&tiny(), tmp.path()).unwrap();
    let a = &report.artifacts;
    assert_eq!(a.dir, tmp.path().join("tiny-ipmnn"));

    let it = lines(&a.iterations);
    assert_eq!(it[0], "epoch,loss,lambda,lambda_err_max,u_err_max");
    assert_eq!(it.len(), 1 + 30 + 1);
    assert!(it.last().unwrap().starts_with("1499,"));

    let ef = lines(&a.eigenfunction);
    assert_eq!(ef[0], "x1,u_pred,u_exact");
    assert_eq!(ef.len(), 401);
    let den = lines(&a.density);
    assert_eq!(den[0], "bin_lo,bin_hi,density_pred,density_exact");
    assert_eq!(den.len(), 31);

    assert!(a.checkpoint.is_file());
    assert_eq!(ExperimentConfig::load(&a.config).unwrap(), tiny());
    assert_eq!(RunReport::load(&a.dir).unwrap(), report);

    let pi2 = std::f64::consts::PI.powi(2);
    assert_eq!(report.lambda_exact, Some(pi2));
    assert!(report.relative_error.unwrap() < 5e-2, "{}", report.summary());
    assert!(report.heldout_u_err.unwrap() < 0.5);
    assert!(report.density_discrepancy.unwrap().is_finite());
    assert_eq!(report.epochs, 1500);
}

#[test]
fn runs_never_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny().with_profile(DESK_PROFILE).unwrap();
    let a = harness::run(&cfg, tmp.path()).unwrap();
    let b = harness::run(&cfg, tmp.path()).unwrap();
    assert_ne!(a.artifacts.dir, b.artifacts.dir);
    assert!(b.artifacts.dir.ends_with("tiny-ipmnn-2"));
    assert_eq!(
        fs::read(&a.artifacts.iterations).unwrap(),
        fs::read(&b.artifacts.iterations).unwrap()
    );
}

#[test]
fn seed_changes_the_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny().with_profile(DESK_PROFILE).unwrap();
    let mut other = cfg.clone();
    other.training.seed = 99;
    let a = harness::run(&cfg, tmp.path()).unwrap();
    let b = harness::run(&other, tmp.path()).unwrap();
    assert_ne!(
        fs::read(&a.artifacts.iterations).unwrap(),
        fs::read(&b.artifacts.iterations).unwrap()
    );
}

#[test]
fn invalid_config_lists_all_violations_and_writes_nothing() {
    let mut cfg = registry::experiment("ipmnn-fp-d1").unwrap();
    cfg.architecture.layer_sizes = vec![2, 20, 1];
    cfg.training.epochs = 0;
    let tmp = tempfile::tempdir().unwrap();
    match harness::run(&cfg, tmp.path()) {
        Err(Error::Config(v)) => {
            assert_eq!(v.len(), 2, "{v:?}");
            assert!(v.iter().any(|m| m.contains("expected 6")));
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn short_fokker_planck_run() {
    let mut cfg = registry::experiment("ipmnn-fp-d1").unwrap();
    cfg.training.n_samples = 200;
    cfg.training.epochs = 30;
    cfg.architecture.layer_sizes = vec![6, 8, 1];
    cfg.outputs.density_points = 1000;
    cfg.outputs.heldout_points = 100;
    let tmp = tempfile::tempdir().unwrap();
    let r = harness::run(&cfg, tmp.path()).unwrap();
    assert_eq!(r.lambda_exact, Some(0.0));
    assert_eq!(r.relative_error, r.abs_error);
    assert!(r.lambda.is_finite());
}

#[test]
fn unknown_profile_is_a_config_error() {
    assert!(matches!(tiny().with_profile("laptop"), Err(Error::Config(_))));
}

#[test]
fn tiny_sweep() {
    let cfg = SweepConfig::from_toml(
        r#"
name = "tiny-sweep"
grid = [4, 8]
layer_sizes = [2, 6, 1]
epochs = 20
"#,
    )
    .unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let path = harness::run_sweep(&cfg, tmp.path()).unwrap();
    let rows = lines(&path);
    assert_eq!(rows[0], harness::SWEEP_CSV_HEADER.join(","));
    assert_eq!(rows.len(), 3);
    let first: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(first[0], "4");
    let fdm_err: f64 = first[5].parse().unwrap();
    let fdm_u: f64 = first[6].parse().unwrap();
    let h: f64 = 0.2;
    let discrete = 2.0 * 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
    assert!((fdm_err - (2.0 * std::f64::consts::PI.powi(2) - discrete).abs()).abs() < 1e-9);
    assert!(fdm_u < 1e-10);

    let again = harness::run_sweep(&cfg, tmp.path()).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());

    let bad = SweepConfig { grid: vec![], ..cfg };
    assert!(matches!(harness::fdm_vs_nn_sweep(&bad), Err(Error::Config(_))));
}

#[test]
fn sign_flip_vanishes_after_alignment() {
    let x = ndarray::Array1::<f64>::linspace(0.0, 1.0, 2001);
    let exact = x.mapv(|v| (3.0 * v).sin() + 0.3);
    let mut flipped = exact.mapv(|v| -v);
    assert!(harness::compare_densities(flipped.view(), exact.view(), 50).unwrap() > 0.1);
    pmnn::training::align_sign(&mut flipped, exact.view());
    assert_eq!(
        harness::compare_densities(flipped.view(), exact.view(), 50).unwrap(),
        0.0
    );
}
