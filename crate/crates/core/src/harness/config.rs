//! Experiment configuration schema (TOML).
//!
//! ```toml
//! name = "ipmnn-d1"
//!
//! [problem]
//! operator = "neg-laplacian"   # or "laplacian-plus-constant", "fokker-planck"
//! dim = 1
//! shift = 0.0
//! boundary = { kind = "dirichlet" }   # or { kind = "periodic", period = 6.283…, modes = 3 }
//!
//! [architecture]
//! layer_sizes = [1, 20, 20, 20, 20, 1]
//!
//! [training]
//! method = "ipmnn"
//! n_samples = 10000
//! epochs = 50000
//!
//! [exact]
//! kind = "sine-product"
//! modes = [1]
//!
//! [profiles.desk]
//! n_samples = 2000
//! epochs = 20000
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{BoundarySpec, ExactSolution, OperatorKind, OperatorSpec, PotentialSpec};
use crate::sampling::DomainBox;
use crate::training::{ExactReference, Method, Problem, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorName {
    NegLaplacian,
    LaplacianPlusConstant,
    FokkerPlanck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundaryConfig {
    /// Homogeneous Dirichlet on the unit box.
    Dirichlet,
    /// Periodic on `[0, period]^d` with `modes` Fourier features per axis.
    Periodic { period: f64, modes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub operator: OperatorName,
    pub dim: usize,
    /// `c` in `Δu + c u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// Potential coefficients; the documented default spread is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<Vec<f64>>,
    /// `α` in `ℒ - αI`.
    #[serde(default)]
    pub shift: f64,
    pub boundary: BoundaryConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub layer_sizes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub method: Method,
    pub n_samples: usize,
    pub epochs: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub detach_norm: bool,
}

fn default_lr() -> f64 {
    1e-3
}

fn default_record_every() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
    #[serde(default = "default_density_points")]
    pub density_points: usize,
    /// Points of the held-out evaluation set.
    #[serde(default = "default_heldout_points")]
    pub heldout_points: usize,
}

fn default_bins() -> usize {
    50
}

fn default_density_points() -> usize {
    100_000
}

fn default_heldout_points() -> usize {
    10_000
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            histogram_bins: default_bins(),
            density_points: default_density_points(),
            heldout_points: default_heldout_points(),
        }
    }
}

/// Overrides applied by a named profile.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_points: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub problem: ProblemConfig,
    pub architecture: ArchitectureConfig,
    pub training: TrainingSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<ExactSolution>,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub profiles: BTreeMap<String, ProfileOverride>,
}

/// `full` leaves the configuration untouched.
pub const FULL_PROFILE: &str = "full";
pub const DESK_PROFILE: &str = "desk";

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        ExperimentConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Copy with the named profile's overrides applied and the profile table
    /// removed.
    pub fn with_profile(&self, profile: &str) -> Result<Self> {
        let mut out = self.clone();
        out.profiles.clear();
        if profile == FULL_PROFILE {
            return Ok(out);
        }
        let o = self
            .profiles
            .get(profile)
            .ok_or_else(|| Error::Config(vec![format!("{}: no profile named `{profile}`", self.name)]))?;
        if let Some(n) = o.n_samples {
            out.training.n_samples = n;
        }
        if let Some(e) = o.epochs {
            out.training.epochs = e;
        }
        if let Some(r) = o.record_every {
            out.training.record_every = r;
        }
        if let Some(p) = o.density_points {
            out.outputs.density_points = p;
        }
        Ok(out)
    }

    /// Network input width implied by the problem and boundary treatment.
    pub fn expected_input_width(&self) -> usize {
        match self.problem.boundary {
            BoundaryConfig::Dirichlet => self.problem.dim,
            BoundaryConfig::Periodic { modes, .. } => 2 * self.problem.dim * modes,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            method: t.method,
            layer_sizes: self.architecture.layer_sizes.clone(),
            n_samples: t.n_samples,
            epochs: t.epochs,
            epsilon: t.epsilon,
            learning_rate: t.learning_rate,
            seed: t.seed,
            record_every: t.record_every,
            detach_norm: t.detach_norm,
        }
    }

    /// Every violated rule, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let p = &self.problem;
        if self.name.trim().is_empty() {
            v.push("name must not be empty".to_string());
        }
        if p.dim == 0 {
            v.push("problem.dim must be at least 1".to_string());
        }
        if !p.shift.is_finite() {
            v.push("problem.shift must be finite".to_string());
        }
        match p.operator {
            OperatorName::LaplacianPlusConstant => {
                if p.constant.is_none() {
                    v.push("problem.constant is required for laplacian-plus-constant".to_string());
                }
            }
            _ => {
                if p.constant.is_some() {
                    v.push("problem.constant only applies to laplacian-plus-constant".to_string());
                }
            }
        }
        match (p.operator, &p.potential) {
            (OperatorName::FokkerPlanck, Some(c)) => {
                if c.len() != p.dim {
                    v.push(format!(
                        "problem.potential has {} coefficients, expected {}",
                        c.len(),
                        p.dim
                    ));
                }
                if let Err(e) = PotentialSpec::new(c.clone()) {
                    v.push(format!("problem.potential: {e}"));
                }
            }
            (OperatorName::FokkerPlanck, None) => {}
            (_, Some(_)) => v.push("problem.potential only applies to fokker-planck".to_string()),
            (_, None) => {}
        }
        if let BoundaryConfig::Periodic { period, modes } = p.boundary {
            if !(period > 0.0 && period.is_finite()) {
                v.push(format!("boundary.period must be positive, got {period}"));
            }
            if modes == 0 {
                v.push("boundary.modes must be at least 1".to_string());
            }
        }
        let sizes = &self.architecture.layer_sizes;
        match sizes.first() {
            Some(&w) if w != self.expected_input_width() => v.push(format!(
                "architecture.layer_sizes starts with input width {w}, expected {}",
                self.expected_input_width()
            )),
            _ => {}
        }
        for msg in self.train_config().violations() {
            v.push(format!("training: {msg}"));
        }
        if let Some(exact) = &self.exact {
            match exact.dim() {
                Some(d) if d != p.dim => v.push(format!("exact solution has dimension {d}, problem has {}", p.dim)),
                _ => {}
            }
            if let Ok(kind) = self.operator_kind() {
                if let Err(e) = exact.eigenvalue(&kind) {
                    v.push(format!("exact: {e}"));
                }
            }
        }
        if self.outputs.histogram_bins < 2 {
            v.push("outputs.histogram_bins must be at least 2".to_string());
        }
        if self.outputs.density_points == 0 || self.outputs.heldout_points == 0 {
            v.push("outputs point counts must be positive".to_string());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }

    fn operator_kind(&self) -> Result<OperatorKind> {
        let p = &self.problem;
        Ok(match p.operator {
            OperatorName::NegLaplacian => OperatorKind::NegLaplacian,
            OperatorName::LaplacianPlusConstant => OperatorKind::LaplacianPlusConstant {
                constant: p.constant.unwrap_or(0.0),
            },
            OperatorName::FokkerPlanck => OperatorKind::FokkerPlanck {
                potential: match &p.potential {
                    Some(c) => PotentialSpec::new(c.clone())?,
                    None => PotentialSpec::default_for_dim(p.dim),
                },
            },
        })
    }

    pub fn problem(&self) -> Result<Problem> {
        self.validate()?;
        let p = &self.problem;
        let op = OperatorSpec {
            kind: self.operator_kind()?,
            shift: p.shift,
        };
        let (bc, domain) = match p.boundary {
            BoundaryConfig::Dirichlet => (BoundarySpec::DirichletHomogeneous, DomainBox::unit(p.dim)?),
            BoundaryConfig::Periodic { period, modes } => (
                BoundarySpec::periodic(p.dim, period, modes),
                DomainBox::cube(p.dim, 0.0, period)?,
            ),
        };
        Ok(Problem { op, bc, domain })
    }

    /// Known eigenpair of the unshifted operator, if an exact solution is named.
    pub fn exact_reference(&self) -> Result<Option<ExactReference>> {
        match &self.exact {
            None => Ok(None),
            Some(sol) => Ok(Some(ExactReference {
                lambda: sol.eigenvalue(&self.operator_kind()?)?,
                solution: sol.clone(),
            })),
        }
    }
}
