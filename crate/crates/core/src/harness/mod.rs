//! Experiment orchestration: configuration, registry, runs and reports.

pub mod config;
pub mod density;
pub mod registry;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

pub use config::{ExperimentConfig, DESK_PROFILE, FULL_PROFILE};
pub use density::{compare_densities, density_histogram, Histogram};
pub use registry::{registry, RegistryEntry, SweepConfig};

use crate::error::{Error, Result};
use crate::fdm::fdm_reference_error;
use crate::io::{fmt_num, num_row, write_csv};
use crate::network::Mlp;
use crate::problems::{BoundarySpec, ExactSolution, OperatorSpec};
use crate::sampling::{normalize, uniform_grid, uniform_random, DomainBox, SampleSet};
use crate::training::{
    align_sign, eigenfunction_error, run_solver_on, trial_values, write_iterations_csv, IterationRecord, Method,
    Problem, TrainConfig,
};

/// Rows per evaluation batch when sampling a trained network.
const EVAL_BATCH: usize = 8192;

/// Paths written by one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub iterations: PathBuf,
    pub eigenfunction: PathBuf,
    pub density: PathBuf,
    pub checkpoint: PathBuf,
    pub report: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub lambda: f64,
    pub lambda_exact: Option<f64>,
    pub abs_error: Option<f64>,
    /// `|λ - λ_exact| / |λ_exact|`, or the absolute error when `λ_exact = 0`.
    pub relative_error: Option<f64>,
    /// Max-norm eigenfunction error on the held-out set.
    pub heldout_u_err: Option<f64>,
    /// Largest per-bin density difference.
    pub density_discrepancy: Option<f64>,
    pub final_loss: f64,
    pub epochs: usize,
    pub wall_time_s: f64,
    pub artifacts: Artifacts,
}

impl RunReport {
    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(dir.join("report.json"))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4e}")).unwrap_or_else(|| "-".into());
        format!(
            "{}: lambda {:.8} (exact {}, rel err {}), u err {}, density {}, loss {:.3e}, {} epochs, {:.1}s",
            self.config.name,
            self.lambda,
            self.lambda_exact
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "-".into()),
            opt(self.relative_error),
            opt(self.heldout_u_err),
            opt(self.density_discrepancy),
            self.final_loss,
            self.epochs,
            self.wall_time_s
        )
    }
}

/// Creates `root/name`, or `root/name-2`, `root/name-3`, ... if taken.
pub fn fresh_dir(root: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(root)?;
    for k in 1..10_000 {
        let dir = if k == 1 {
            root.join(name)
        } else {
            root.join(format!("{name}-{k}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(Error::ArtifactExists(root.join(name).display().to_string()))
}

/// Trial values at many points, evaluated in batches.
pub fn evaluate_network(mlp: &Mlp, bc: &BoundarySpec, points: &Array2<f64>) -> Result<Array1<f64>> {
    let mut out = Vec::with_capacity(points.nrows());
    for chunk in points.axis_chunks_iter(Axis(0), EVAL_BATCH) {
        out.extend(trial_values(mlp, bc, chunk)?);
    }
    Ok(Array1::from(out))
}

/// Trial values at row-major points of width `dim`.
pub fn evaluate_flat(mlp: &Mlp, bc: &BoundarySpec, points: &[f64], dim: usize) -> Result<Vec<f64>> {
    if dim == 0 || !points.len().is_multiple_of(dim) {
        return Err(Error::InvalidArgument(format!(
            "{} coordinates do not split into rows of {dim}",
            points.len()
        )));
    }
    let arr = Array2::from_shape_vec((points.len() / dim, dim), points.to_vec())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(evaluate_network(mlp, bc, &arr)?.to_vec())
}

/// Held-out evaluation points: a tensor grid up to two dimensions, uniform
/// random points beyond.
pub fn heldout_set(domain: &DomainBox, n: usize, seed: u64) -> Result<SampleSet> {
    match domain.dim() {
        1 => uniform_grid(n.max(2), domain),
        2 => uniform_grid(((n as f64).sqrt().round() as usize).max(2), domain),
        _ => uniform_random(n, domain, seed),
    }
}

/// Predicted and exact values on `points`, both RMS-normalized and the
/// prediction sign-aligned to the exact one.
pub fn aligned_pair(
    mlp: &Mlp,
    problem: &Problem,
    exact: &ExactSolution,
    points: &Array2<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let e = normalize(exact.values(&problem.op.kind, points.view())?.view())?;
    let mut p = normalize(evaluate_network(mlp, &problem.bc, points)?.view())?;
    align_sign(&mut p, e.view());
    Ok((p, e))
}

/// Trains, evaluates and writes every artifact of one experiment.
pub fn run(config: &ExperimentConfig, out_root: &Path) -> Result<RunReport> {
    run_with(config, out_root, &mut |_| {})
}

pub fn run_with(
    config: &ExperimentConfig,
    out_root: &Path,
    on_record: &mut dyn FnMut(&IterationRecord),
) -> Result<RunReport> {
    config.validate()?;
    let problem = config.problem()?;
    let exact = config.exact_reference()?;
    let train = config.train_config();
    let dir = fresh_dir(out_root, &config.name)?;
    let artifacts = Artifacts {
        config: dir.join("config.toml"),
        iterations: dir.join("iterations.csv"),
        eigenfunction: dir.join("eigenfunction.csv"),
        density: dir.join("density.csv"),
        checkpoint: dir.join("network.bin"),
        report: dir.join("report.json"),
        dir,
    };
    fs::write(&artifacts.config, config.to_toml()?)?;

    let start = Instant::now();
    let samples = crate::sampling::lhs_sample(train.n_samples, &problem.domain, train.seed)?;
    let run = run_solver_on(&train, &problem, samples, exact.as_ref(), on_record)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    write_iterations_csv(&artifacts.iterations, &run.records)?;
    run.mlp.save(&artifacts.checkpoint)?;

    let heldout = heldout_set(
        &problem.domain,
        config.outputs.heldout_points,
        train.seed.wrapping_add(2),
    )?;
    let density_pts = uniform_random(
        config.outputs.density_points,
        &problem.domain,
        train.seed.wrapping_add(3),
    )?;
    let bins = config.outputs.histogram_bins;
    let (heldout_u_err, density_discrepancy) = match &exact {
        Some(e) => {
            let (p, x) = aligned_pair(&run.mlp, &problem, &e.solution, heldout.points())?;
            write_eigenfunction_csv(&artifacts.eigenfunction, heldout.points(), &p, Some(&x))?;
            let (dp, dx) = aligned_pair(&run.mlp, &problem, &e.solution, density_pts.points())?;
            let (hp, hx) = density::paired_histograms(dp.view(), dx.view(), bins)?;
            write_density_csv(&artifacts.density, &hp, Some(&hx))?;
            (
                Some(eigenfunction_error(p.view(), x.view())?),
                Some(compare_densities(dp.view(), dx.view(), bins)?),
            )
        }
        None => {
            let p = normalize(evaluate_network(&run.mlp, &problem.bc, heldout.points())?.view())?;
            write_eigenfunction_csv(&artifacts.eigenfunction, heldout.points(), &p, None)?;
            let dp = normalize(evaluate_network(&run.mlp, &problem.bc, density_pts.points())?.view())?;
            write_density_csv(&artifacts.density, &density_histogram(dp.view(), bins)?, None)?;
            (None, None)
        }
    };

    let lambda = run.estimate.lambda;
    let lambda_exact = exact.as_ref().map(|e| e.lambda);
    let abs_error = lambda_exact.map(|l| (lambda - l).abs());
    let relative_error = match (abs_error, lambda_exact) {
        (Some(a), Some(l)) if l != 0.0 => Some(a / l.abs()),
        (Some(a), Some(_)) => Some(a),
        _ => None,
    };
    let report = RunReport {
        config: config.clone(),
        lambda,
        lambda_exact,
        abs_error,
        relative_error,
        heldout_u_err,
        density_discrepancy,
        final_loss: run.estimate.final_loss,
        epochs: run.estimate.epochs,
        wall_time_s,
        artifacts: artifacts.clone(),
    };
    fs::write(&artifacts.report, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

fn write_eigenfunction_csv(
    path: &Path,
    points: &Array2<f64>,
    predicted: &Array1<f64>,
    exact: Option<&Array1<f64>>,
) -> Result<()> {
    let mut header: Vec<String> = (1..=points.ncols()).map(|i| format!("x{i}")).collect();
    header.push("u_pred".into());
    header.push("u_exact".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = points.rows().into_iter().enumerate().map(|(i, p)| {
        let mut row = num_row(&p.to_vec());
        row.push(',');
        row.push_str(&fmt_num(predicted[i]));
        row.push(',');
        if let Some(e) = exact {
            row.push_str(&fmt_num(e[i]));
        }
        row
    });
    write_csv(path, &header, rows)
}

fn write_density_csv(path: &Path, predicted: &Histogram, exact: Option<&Histogram>) -> Result<()> {
    let rows = (0..predicted.bins()).map(|i| {
        let mut row = num_row(&[predicted.edges[i], predicted.edges[i + 1], predicted.heights[i]]);
        row.push(',');
        if let Some(e) = exact {
            row.push_str(&fmt_num(e.heights[i]));
        }
        row
    });
    write_csv(path, &["bin_lo", "bin_hi", "density_pred", "density_exact"], rows)
}

/// One grid size of the finite-difference comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_h: usize,
    pub nn_lambda: f64,
    pub nn_lambda_err: f64,
    pub nn_u_err: f64,
    pub fdm_lambda: f64,
    pub fdm_lambda_err: f64,
    pub fdm_u_err: f64,
}

pub const SWEEP_CSV_HEADER: [&str; 7] = [
    "n_h",
    "nn_lambda",
    "nn_lambda_err",
    "nn_u_err",
    "fdm_lambda",
    "fdm_lambda_err",
    "fdm_u_err",
];

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{}",
            self.n_h,
            num_row(&[
                self.nn_lambda,
                self.nn_lambda_err,
                self.nn_u_err,
                self.fdm_lambda,
                self.fdm_lambda_err,
                self.fdm_u_err
            ])
        )
    }
}

/// Trains IPMNN on each uniform grid and solves the same grid by finite
/// differences; errors are against `sin(πx)sin(πy)` and `2π²`.
pub fn fdm_vs_nn_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Config(v));
    }
    let domain = DomainBox::unit(2)?;
    let problem = Problem {
        op: OperatorSpec::neg_laplacian(),
        bc: BoundarySpec::DirichletHomogeneous,
        domain: domain.clone(),
    };
    let exact = crate::training::ExactReference {
        lambda: 2.0 * std::f64::consts::PI.powi(2),
        solution: ExactSolution::ground_sine(2),
    };
    let mut rows = Vec::with_capacity(cfg.grid.len());
    for &n_h in &cfg.grid {
        let grid = uniform_grid(n_h, &domain)?;
        let mut train = TrainConfig::new(Method::Ipmnn, cfg.layer_sizes.clone(), grid.len(), cfg.epochs);
        train.seed = cfg.seed;
        train.record_every = cfg.epochs;
        let run = run_solver_on(&train, &problem, grid, Some(&exact), &mut |_| {})?;
        let exact_on_grid = exact.solution.values(&problem.op.kind, run.samples.points().view())?;
        let fdm = fdm_reference_error(2, n_h)?;
        rows.push(SweepRow {
            n_h,
            nn_lambda: run.estimate.lambda,
            nn_lambda_err: (run.estimate.lambda - exact.lambda).abs(),
            nn_u_err: eigenfunction_error(run.estimate.eigenfunction.view(), exact_on_grid.view())?,
            fdm_lambda: fdm.lambda,
            fdm_lambda_err: fdm.lambda_err,
            fdm_u_err: fdm.u_err,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    write_csv(path, &SWEEP_CSV_HEADER, rows.iter().map(SweepRow::csv_row))
}

/// Runs the sweep into a fresh artifact directory and returns the CSV path.
pub fn run_sweep(cfg: &SweepConfig, out_root: &Path) -> Result<PathBuf> {
    let rows = fdm_vs_nn_sweep(cfg)?;
    let dir = fresh_dir(out_root, &cfg.name)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
    let path = dir.join("sweep.csv");
    write_sweep_csv(&path, &rows)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_round_trips_through_toml() {
        for entry in registry() {
            match entry {
                RegistryEntry::Experiment(c) => {
                    let text = c.to_toml().unwrap();
                    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), *c, "{text}");
                    c.validate().unwrap();
                    c.with_profile(DESK_PROFILE).unwrap().validate().unwrap();
                }
                RegistryEntry::Sweep(s) => {
                    assert_eq!(SweepConfig::from_toml(&s.to_toml().unwrap()).unwrap(), s);
                    assert!(s.violations().is_empty());
                }
            }
        }
    }

    #[test]
    fn registry_has_seventeen_entries() {
        let names: Vec<String> = registry().iter().map(|e| e.name().to_string()).collect();
        assert_eq!(names.len(), 17);
        assert!(names.contains(&"pmnn-d1".to_string()));
        assert!(names.contains(&"ipmnn-fp-d10".to_string()));
        assert!(names.contains(&"interior-a225".to_string()));
        assert!(matches!(registry::lookup("nope"), Err(Error::UnknownExperiment(_))));
    }

    #[test]
    fn registry_settings_are_encoded() {
        let c = registry::experiment("pmnn-d1").unwrap();
        assert_eq!(c.training.n_samples, 10_000);
        assert_eq!(c.training.epochs, 50_000);
        assert_eq!(c.architecture.layer_sizes, vec![1, 20, 20, 20, 20, 1]);
        let fp = registry::experiment("ipmnn-fp-d5").unwrap();
        assert_eq!(fp.architecture.layer_sizes, vec![30, 60, 60, 60, 60, 1]);
        let d10 = registry::experiment("ipmnn-d10").unwrap();
        assert_eq!((d10.training.n_samples, d10.training.epochs), (100_000, 100_000));
        let desk = c.with_profile(DESK_PROFILE).unwrap();
        assert_eq!((desk.training.n_samples, desk.training.epochs), (2000, 20_000));
    }

    #[test]
    fn periodic_width_mismatch_names_expected_width() {
        let mut c = registry::experiment("ipmnn-fp-d1").unwrap();
        c.architecture.layer_sizes[0] = 5;
        match c.validate() {
            Err(Error::Config(v)) => assert!(v.iter().any(|m| m.contains("expected 6")), "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn all_violations_are_listed() {
        let mut c = registry::experiment("pmnn-d2").unwrap();
        c.problem.constant = None;
        c.training.epochs = 0;
        c.outputs.histogram_bins = 1;
        match c.validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 3, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fresh_dir_never_reuses() {
        let tmp = tempfile::tempdir().unwrap();
        let a = fresh_dir(tmp.path(), "x").unwrap();
        let b = fresh_dir(tmp.path(), "x").unwrap();
        assert_ne!(a, b);
        assert!(b.ends_with("x-2"));
    }
}
