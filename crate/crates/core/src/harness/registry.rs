//! Built-in experiment configurations.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::config::{
    ArchitectureConfig, BoundaryConfig, ExperimentConfig, OperatorName, OutputConfig, ProblemConfig, ProfileOverride,
    TrainingSection, DESK_PROFILE,
};
use crate::error::{Error, Result};
use crate::problems::{ExactSolution, PotentialSpec};
use crate::training::Method;

/// Shift used for the Fokker-Planck runs, in the `ℒ - αI` convention.
pub const FOKKER_PLANCK_SHIFT: f64 = -1.0;

/// Desk-scale sample count and epoch budget.
pub const DESK_SAMPLES: usize = 2000;
pub const DESK_EPOCHS: usize = 20_000;

/// Grid sizes of the finite-difference comparison.
pub const SWEEP_GRID: [usize; 4] = [8, 16, 32, 64];

/// Sample count, epochs and hidden width per dimension.
fn scale(dim: usize) -> (usize, usize, usize) {
    match dim {
        1 => (10_000, 50_000, 20),
        2 => (20_000, 50_000, 20),
        5 => (50_000, 50_000, 40),
        _ => (100_000, 100_000, 80),
    }
}

fn fp_width(dim: usize) -> usize {
    match dim {
        1 => 20,
        2 => 40,
        5 => 60,
        _ => 80,
    }
}

fn layers(input: usize, width: usize) -> Vec<usize> {
    vec![input, width, width, width, width, 1]
}

fn desk() -> BTreeMap<String, ProfileOverride> {
    let mut m = BTreeMap::new();
    m.insert(
        DESK_PROFILE.to_string(),
        ProfileOverride {
            n_samples: Some(DESK_SAMPLES),
            epochs: Some(DESK_EPOCHS),
            record_every: None,
            density_points: None,
        },
    );
    m
}

fn training(method: Method, n: usize, epochs: usize) -> TrainingSection {
    TrainingSection {
        method,
        n_samples: n,
        epochs,
        epsilon: None,
        learning_rate: 1e-3,
        seed: 1,
        record_every: 100,
        detach_norm: false,
    }
}

fn dirichlet(operator: OperatorName, dim: usize, constant: Option<f64>, shift: f64) -> ProblemConfig {
    ProblemConfig {
        operator,
        dim,
        constant,
        potential: None,
        shift,
        boundary: BoundaryConfig::Dirichlet,
    }
}

pub fn pmnn(dim: usize) -> ExperimentConfig {
    let (n, epochs, width) = scale(dim);
    ExperimentConfig {
        name: format!("pmnn-d{dim}"),
        description: format!("PMNN, Δu + 100u on [0,1]^{dim}, largest eigenvalue 100 - {dim}π²"),
        problem: dirichlet(OperatorName::LaplacianPlusConstant, dim, Some(100.0), 0.0),
        architecture: ArchitectureConfig {
            layer_sizes: layers(dim, width),
        },
        training: training(Method::Pmnn, n, epochs),
        exact: Some(ExactSolution::ground_sine(dim)),
        outputs: OutputConfig::default(),
        profiles: desk(),
    }
}

pub fn ipmnn(dim: usize) -> ExperimentConfig {
    let (n, epochs, width) = scale(dim);
    ExperimentConfig {
        name: format!("ipmnn-d{dim}"),
        description: format!("IPMNN, -Δu on [0,1]^{dim}, smallest eigenvalue {dim}π²"),
        problem: dirichlet(OperatorName::NegLaplacian, dim, None, 0.0),
        architecture: ArchitectureConfig {
            layer_sizes: layers(dim, width),
        },
        training: training(Method::Ipmnn, n, epochs),
        exact: Some(ExactSolution::ground_sine(dim)),
        outputs: OutputConfig::default(),
        profiles: desk(),
    }
}

pub fn fokker_planck(dim: usize) -> ExperimentConfig {
    let (n, epochs, _) = scale(dim);
    let modes = 3;
    ExperimentConfig {
        name: format!("ipmnn-fp-d{dim}"),
        description: format!("IPMNN, Fokker-Planck on periodic [0,2π]^{dim}, eigenvalue 0 with eigenfunction exp(-V)"),
        problem: ProblemConfig {
            operator: OperatorName::FokkerPlanck,
            dim,
            constant: None,
            potential: Some(PotentialSpec::default_for_dim(dim).coefficients().to_vec()),
            shift: FOKKER_PLANCK_SHIFT,
            boundary: BoundaryConfig::Periodic {
                period: 2.0 * PI,
                modes,
            },
        },
        architecture: ArchitectureConfig {
            layer_sizes: layers(2 * dim * modes, fp_width(dim)),
        },
        training: training(Method::Ipmnn, n, epochs),
        exact: Some(ExactSolution::ExpNegPotential),
        outputs: OutputConfig::default(),
        profiles: desk(),
    }
}

/// Interior eigenvalue `m²π²` of `-Δ` on `[0,1]` found from the shift `alpha`.
pub fn interior(alpha: u32, mode: u32) -> ExperimentConfig {
    let (n, epochs, width) = scale(1);
    ExperimentConfig {
        name: format!("interior-a{alpha}"),
        description: format!("IPMNN, -Δu - {alpha}u on [0,1], eigenvalue {}π²", mode * mode),
        problem: dirichlet(OperatorName::NegLaplacian, 1, None, alpha as f64),
        architecture: ArchitectureConfig {
            layer_sizes: layers(1, width),
        },
        training: training(Method::Ipmnn, n, epochs),
        exact: Some(ExactSolution::SineProduct { modes: vec![mode] }),
        outputs: OutputConfig::default(),
        profiles: desk(),
    }
}

/// IPMNN and finite differences on shared uniform grids in 2D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    pub grid: Vec<usize>,
    pub layer_sizes: Vec<usize>,
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, ProfileOverride>,
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn with_profile(&self, profile: &str) -> Result<Self> {
        let mut out = self.clone();
        out.profiles.clear();
        if profile == super::config::FULL_PROFILE {
            return Ok(out);
        }
        let o = self
            .profiles
            .get(profile)
            .ok_or_else(|| Error::Config(vec![format!("{}: no profile named `{profile}`", self.name)]))?;
        if let Some(e) = o.epochs {
            out.epochs = e;
        }
        Ok(out)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.grid.is_empty() || self.grid.iter().any(|&n| n < 2) {
            v.push("grid must list sizes of at least 2".to_string());
        }
        if self.layer_sizes.first() != Some(&2) {
            v.push("layer_sizes must start with input width 2".to_string());
        }
        if self.epochs == 0 {
            v.push("epochs must be at least 1".to_string());
        }
        v
    }
}

pub fn fdm_sweep() -> SweepConfig {
    let mut profiles = BTreeMap::new();
    profiles.insert(
        DESK_PROFILE.to_string(),
        ProfileOverride {
            epochs: Some(5_000),
            ..ProfileOverride::default()
        },
    );
    SweepConfig {
        name: "fdm-sweep".to_string(),
        grid: SWEEP_GRID.to_vec(),
        layer_sizes: layers(2, 20),
        epochs: 50_000,
        seed: 1,
        profiles,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RegistryEntry {
    Experiment(Box<ExperimentConfig>),
    Sweep(SweepConfig),
}

impl RegistryEntry {
    pub fn name(&self) -> &str {
        match self {
            RegistryEntry::Experiment(c) => &c.name,
            RegistryEntry::Sweep(s) => &s.name,
        }
    }

    pub fn summary(&self) -> String {
        match self {
            RegistryEntry::Experiment(c) => c.description.clone(),
            RegistryEntry::Sweep(s) => format!("IPMNN vs finite differences on 2D grids {:?}", s.grid),
        }
    }
}

/// Every shipped configuration, in listing order.
pub fn registry() -> Vec<RegistryEntry> {
    let dims = [1, 2, 5, 10];
    let mut out: Vec<RegistryEntry> = Vec::new();
    out.extend(dims.iter().map(|&d| RegistryEntry::Experiment(Box::new(pmnn(d)))));
    out.extend(dims.iter().map(|&d| RegistryEntry::Experiment(Box::new(ipmnn(d)))));
    out.extend(
        dims.iter()
            .map(|&d| RegistryEntry::Experiment(Box::new(fokker_planck(d)))),
    );
    out.extend(
        [(36, 2), (81, 3), (144, 4), (225, 5)]
            .iter()
            .map(|&(a, m)| RegistryEntry::Experiment(Box::new(interior(a, m)))),
    );
    out.push(RegistryEntry::Sweep(fdm_sweep()));
    out
}

pub fn lookup(name: &str) -> Result<RegistryEntry> {
    registry()
        .into_iter()
        .find(|e| e.name() == name)
        .ok_or_else(|| Error::UnknownExperiment(name.to_string()))
}

pub fn experiment(name: &str) -> Result<ExperimentConfig> {
    match lookup(name)? {
        RegistryEntry::Experiment(c) => Ok(*c),
        RegistryEntry::Sweep(_) => Err(Error::InvalidArgument(format!("`{name}` is a sweep, use sweep-fdm"))),
    }
}
