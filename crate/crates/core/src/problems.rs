//! Differential operators, boundary-exact trial functions and the discrete
//! Rayleigh quotient.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::network::Mlp;
use crate::sampling::SampleSet;

/// Coefficients `c_i` of the potential `V(x) = sin(Σ c_i cos x_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PotentialSpec {
    coefficients: Vec<f64>,
}

impl TryFrom<Vec<f64>> for PotentialSpec {
    type Error = Error;
    fn try_from(c: Vec<f64>) -> Result<Self> {
        PotentialSpec::new(c)
    }
}

impl From<PotentialSpec> for Vec<f64> {
    fn from(p: PotentialSpec) -> Self {
        p.coefficients
    }
}

impl PotentialSpec {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument(
                "potential needs at least one coefficient".into(),
            ));
        }
        if let Some(c) = coefficients.iter().find(|c| !(0.1..=1.0).contains(*c)) {
            return Err(Error::InvalidArgument(format!(
                "potential coefficient {c} outside [0.1, 1]"
            )));
        }
        Ok(PotentialSpec { coefficients })
    }

    /// `c_i = 0.1 + 0.9 (i-1)/max(1, d-1)`, evenly spread over `[0.1, 1]`.
    pub fn default_for_dim(dim: usize) -> Self {
        let denom = (dim.max(2) - 1) as f64;
        let coefficients = (0..dim).map(|i| 0.1 + 0.9 * i as f64 / denom).collect();
        PotentialSpec { coefficients }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    /// Records `V` on the tape.
    pub fn build(&self, tape: &mut Tape, x: &[Var]) -> Result<Var> {
        check_dim(self.dim(), x.len(), "potential dimension")?;
        let mut terms = Vec::with_capacity(x.len());
        for (&xi, &c) in x.iter().zip(&self.coefficients) {
            let cos = tape.cos(xi);
            terms.push(tape.scale(cos, c));
        }
        let s = tape.sum_all(&terms)?;
        Ok(tape.sin(s))
    }

    pub fn value_at(&self, x: ArrayView1<'_, f64>) -> f64 {
        x.iter()
            .zip(&self.coefficients)
            .map(|(xi, c)| c * xi.cos())
            .sum::<f64>()
            .sin()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorKind {
    /// `-Δu`
    NegLaplacian,
    /// `Δu + c u`
    LaplacianPlusConstant { constant: f64 },
    /// `-Δu - ∇V·∇u - ΔV u`
    FokkerPlanck { potential: PotentialSpec },
}

/// A linear operator together with a spectral shift: applies `ℒu - α u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    #[serde(default)]
    pub shift: f64,
}

impl OperatorSpec {
    pub fn neg_laplacian() -> Self {
        OperatorSpec {
            kind: OperatorKind::NegLaplacian,
            shift: 0.0,
        }
    }

    pub fn laplacian_plus_constant(constant: f64) -> Self {
        OperatorSpec {
            kind: OperatorKind::LaplacianPlusConstant { constant },
            shift: 0.0,
        }
    }

    pub fn fokker_planck(potential: PotentialSpec) -> Self {
        OperatorSpec {
            kind: OperatorKind::FokkerPlanck { potential },
            shift: 0.0,
        }
    }

    /// Shifting composes: `(ℒ - α) - β = ℒ - (α + β)`.
    pub fn with_shift(mut self, alpha: f64) -> Self {
        self.shift += alpha;
        self
    }

    pub fn unshifted(&self) -> Self {
        OperatorSpec {
            kind: self.kind.clone(),
            shift: 0.0,
        }
    }

    /// Records `(ℒ - α) u` where `u` is a pointwise node built from `x`.
    pub fn apply(&self, tape: &mut Tape, x: &[Var], u: Var) -> Result<Var> {
        let jet = tape.spatial_jet(u)?;
        let lu = match &self.kind {
            OperatorKind::NegLaplacian => tape.neg(jet.laplacian),
            OperatorKind::LaplacianPlusConstant { constant } => {
                let cu = tape.scale(u, *constant);
                tape.add(jet.laplacian, cu)?
            }
            OperatorKind::FokkerPlanck { potential } => {
                let v = potential.build(tape, x)?;
                let vjet = tape.spatial_jet(v)?;
                let mut terms = Vec::with_capacity(x.len() + 1);
                for (gv, gu) in vjet.gradient.iter().zip(&jet.gradient) {
                    terms.push(tape.mul(*gv, *gu)?);
                }
                terms.push(tape.mul(vjet.laplacian, u)?);
                terms.push(jet.laplacian);
                let sum = tape.sum_all(&terms)?;
                tape.neg(sum)
            }
        };
        if self.shift != 0.0 {
            let au = tape.scale(u, self.shift);
            tape.sub(lu, au)
        } else {
            Ok(lu)
        }
    }
}

/// Builds a scalar expression from coordinate nodes.
pub type ExprFn = Arc<dyn Fn(&mut Tape, &[Var]) -> Result<Var> + Send + Sync>;

/// How the trial function satisfies the boundary condition exactly.
#[derive(Clone)]
pub enum BoundarySpec {
    /// `U = φ N` with `φ(x) = Π x_i (1 - x_i)` on the unit box.
    DirichletHomogeneous,
    /// `U = φ N + G` for a user distance function `φ` and extension `G`.
    DirichletGeneral { distance: ExprFn, extension: ExprFn },
    /// Each `x_i` is replaced by `sin(2πj x_i/P_i), cos(2πj x_i/P_i)` for
    /// `j = 1..=modes` before the first layer.
    Periodic { periods: Vec<f64>, modes: usize },
}

impl fmt::Debug for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundarySpec::DirichletHomogeneous => write!(f, "DirichletHomogeneous"),
            BoundarySpec::DirichletGeneral { .. } => write!(f, "DirichletGeneral"),
            BoundarySpec::Periodic { periods, modes } => f
                .debug_struct("Periodic")
                .field("periods", periods)
                .field("modes", modes)
                .finish(),
        }
    }
}

impl BoundarySpec {
    pub fn periodic(dim: usize, period: f64, modes: usize) -> Self {
        BoundarySpec::Periodic {
            periods: vec![period; dim],
            modes,
        }
    }

    /// Network input width required for a `dim`-dimensional problem.
    pub fn network_input_width(&self, dim: usize) -> usize {
        match self {
            BoundarySpec::Periodic { modes, .. } => 2 * dim * modes,
            _ => dim,
        }
    }

    /// `φ(x) = Π x_i (1 - x_i)`.
    pub fn unit_box_distance(tape: &mut Tape, x: &[Var]) -> Result<Var> {
        let mut factors = Vec::with_capacity(x.len());
        for &xi in x {
            let neg = tape.neg(xi);
            let one_minus = tape.shift(neg, 1.0);
            factors.push(tape.mul(xi, one_minus)?);
        }
        let (&first, rest) = factors
            .split_first()
            .ok_or_else(|| Error::InvalidArgument("zero-dimensional domain".into()))?;
        rest.iter().try_fold(first, |acc, &f| tape.mul(acc, f))
    }

    /// Periodic feature columns for every coordinate.
    pub fn periodic_features(tape: &mut Tape, x: &[Var], periods: &[f64], modes: usize) -> Result<Vec<Var>> {
        check_dim(periods.len(), x.len(), "periodic dimension")?;
        let mut features = Vec::with_capacity(2 * modes * x.len());
        for (&xi, &p) in x.iter().zip(periods) {
            for j in 1..=modes {
                let arg = tape.scale(xi, 2.0 * PI * j as f64 / p);
                features.push(tape.sin(arg));
                features.push(tape.cos(arg));
            }
        }
        Ok(features)
    }
}

/// Anything that can be recorded as a scalar function of the coordinates.
pub trait TrialFunction {
    fn dim(&self) -> usize;
    fn build(&self, tape: &mut Tape, x: &[Var]) -> Result<Var>;
}

/// A network composed with its boundary treatment.
#[derive(Clone, Debug)]
pub struct WrappedNetwork<'a> {
    mlp: &'a Mlp,
    bc: &'a BoundarySpec,
    dim: usize,
}

/// Wraps `mlp` so the resulting trial satisfies `bc` exactly.
pub fn wrap_trial<'a>(mlp: &'a Mlp, bc: &'a BoundarySpec, dim: usize) -> Result<WrappedNetwork<'a>> {
    let expected = bc.network_input_width(dim);
    if mlp.input_width() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            actual: mlp.input_width(),
            context: "network input width for boundary treatment",
        });
    }
    if let BoundarySpec::Periodic { periods, .. } = bc {
        check_dim(dim, periods.len(), "periodic dimension")?;
    }
    Ok(WrappedNetwork { mlp, bc, dim })
}

impl TrialFunction for WrappedNetwork<'_> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn build(&self, tape: &mut Tape, x: &[Var]) -> Result<Var> {
        check_dim(self.dim, x.len(), "trial dimension")?;
        match self.bc {
            BoundarySpec::DirichletHomogeneous => {
                let net = self.mlp.forward_expr(tape, x)?;
                let phi = BoundarySpec::unit_box_distance(tape, x)?;
                tape.mul(phi, net)
            }
            BoundarySpec::DirichletGeneral { distance, extension } => {
                let net = self.mlp.forward_expr(tape, x)?;
                let phi = distance(tape, x)?;
                let g = extension(tape, x)?;
                let pn = tape.mul(phi, net)?;
                tape.add(pn, g)
            }
            BoundarySpec::Periodic { periods, modes } => {
                let features = BoundarySpec::periodic_features(tape, x, periods, *modes)?;
                self.mlp.forward_expr(tape, &features)
            }
        }
    }
}

/// A trial given by a closure, for analytic test functions.
pub struct AnalyticTrial<F> {
    dim: usize,
    f: F,
}

impl<F> AnalyticTrial<F>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    pub fn new(dim: usize, f: F) -> Self {
        AnalyticTrial { dim, f }
    }
}

impl<F> TrialFunction for AnalyticTrial<F>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn build(&self, tape: &mut Tape, x: &[Var]) -> Result<Var> {
        (self.f)(tape, x)
    }
}

/// Trial values `u` and residual `ℒu` recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct OperatorEval {
    pub u: Var,
    pub lu: Var,
}

/// Records the trial and `(ℒ - α) u` on `tape`.
pub fn apply_operator(op: &OperatorSpec, trial: &dyn TrialFunction, tape: &mut Tape) -> Result<OperatorEval> {
    check_dim(trial.dim(), tape.dim(), "tape dimension")?;
    let x = tape.inputs();
    let u = trial.build(tape, &x)?;
    let lu = op.apply(tape, &x, u)?;
    Ok(OperatorEval { u, lu })
}

/// Numeric `(u, (ℒ - α) u)` at every row of `points`.
pub fn apply_operator_values(
    op: &OperatorSpec,
    trial: &dyn TrialFunction,
    points: ArrayView2<'_, f64>,
    params: &[f64],
) -> Result<(Array1<f64>, Array1<f64>)> {
    let mut tape = Tape::with_arity(points, trial.dim(), params)?;
    let eval = apply_operator(op, trial, &mut tape)?;
    Ok((tape.column_values(eval.u), tape.column_values(eval.lu)))
}

/// `Σ ℒu·u / Σ u²` from sampled values.
pub fn rayleigh_from_values(u: ArrayView1<'_, f64>, lu: ArrayView1<'_, f64>) -> Result<f64> {
    let denom: f64 = u.iter().map(|v| v * v).sum();
    if !(denom > 0.0) {
        return Err(Error::Degenerate("trial vanishes on every sample point".into()));
    }
    let num: f64 = u.iter().zip(lu.iter()).map(|(a, b)| a * b).sum();
    Ok(num / denom)
}

/// Discrete Rayleigh quotient of `op` at the trial over `samples`.
pub fn rayleigh_quotient(
    op: &OperatorSpec,
    trial: &dyn TrialFunction,
    samples: &SampleSet,
    params: &[f64],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("empty sample set".into()));
    }
    let (u, lu) = apply_operator_values(op, trial, samples.points().view(), params)?;
    rayleigh_from_values(u.view(), lu.view())
}

/// Closed-form eigenfunctions referenced by name from configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExactSolution {
    /// `Π sin(m_i π x_i)` on the unit box.
    SineProduct { modes: Vec<u32> },
    /// `exp(-V)`, the stationary density of the Fokker-Planck operator.
    ExpNegPotential,
}

impl ExactSolution {
    pub fn ground_sine(dim: usize) -> Self {
        ExactSolution::SineProduct { modes: vec![1; dim] }
    }

    /// Eigenvalue of the unshifted operator for this eigenfunction.
    pub fn eigenvalue(&self, kind: &OperatorKind) -> Result<f64> {
        match (self, kind) {
            (ExactSolution::SineProduct { modes }, OperatorKind::NegLaplacian) => Ok(sine_sum(modes)),
            (ExactSolution::SineProduct { modes }, OperatorKind::LaplacianPlusConstant { constant }) => {
                Ok(constant - sine_sum(modes))
            }
            (ExactSolution::ExpNegPotential, OperatorKind::FokkerPlanck { .. }) => Ok(0.0),
            _ => Err(Error::InvalidArgument(format!(
                "exact solution {self:?} is not an eigenfunction of {kind:?}"
            ))),
        }
    }

    pub fn values(&self, kind: &OperatorKind, points: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        match self {
            ExactSolution::SineProduct { modes } => {
                check_dim(modes.len(), points.ncols(), "exact solution dimension")?;
                Ok(points
                    .rows()
                    .into_iter()
                    .map(|p| p.iter().zip(modes).map(|(x, &m)| (m as f64 * PI * x).sin()).product())
                    .collect())
            }
            ExactSolution::ExpNegPotential => match kind {
                OperatorKind::FokkerPlanck { potential } => {
                    check_dim(potential.dim(), points.ncols(), "potential dimension")?;
                    Ok(points
                        .rows()
                        .into_iter()
                        .map(|p| (-potential.value_at(p)).exp())
                        .collect())
                }
                _ => Err(Error::InvalidArgument("exp(-V) needs a Fokker-Planck operator".into())),
            },
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            ExactSolution::SineProduct { modes } => Some(modes.len()),
            ExactSolution::ExpNegPotential => None,
        }
    }
}

fn sine_sum(modes: &[u32]) -> f64 {
    modes.iter().map(|&m| (m as f64 * PI).powi(2)).sum()
}

fn check_dim(expected: usize, actual: usize, context: &'static str) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            expected,
            actual,
            context,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};

    use super::*;
    use crate::network::Mlp;
    use crate::sampling::{lhs_sample, DomainBox};

    fn sine_trial(dim: usize, scale: f64) -> impl TrialFunction {
        AnalyticTrial::new(dim, move |t: &mut Tape, x: &[Var]| {
            let mut acc = None;
            for &xi in x {
                let a = t.scale(xi, PI);
                let s = t.sin(a);
                acc = Some(match acc {
                    None => s,
                    Some(p) => t.mul(p, s)?,
                });
            }
            Ok(t.scale(acc.expect("dim >= 1"), scale))
        })
    }

    #[test]
    fn neg_laplacian_of_sine_at_midpoint() {
        let pts = array![[0.5]];
        let (u, lu) =
            apply_operator_values(&OperatorSpec::neg_laplacian(), &sine_trial(1, 1.0), pts.view(), &[]).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-15);
        assert!((lu[0] - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn neg_laplacian_matches_central_differences() {
        let f = |x: f64| (PI * x).sin() * x.exp();
        let x0 = 0.37;
        let h = 1e-4;
        let fd = -(f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h);
        let trial = AnalyticTrial::new(1, |t: &mut Tape, x: &[Var]| {
            let a = t.scale(x[0], PI);
            let s = t.sin(a);
            let e = t.exp(x[0]);
            t.mul(s, e)
        });
        let pts = array![[x0]];
        let (_, lu) = apply_operator_values(&OperatorSpec::neg_laplacian(), &trial, pts.view(), &[]).unwrap();
        assert!((lu[0] - fd).abs() < 1e-5 * fd.abs().max(1.0), "{} vs {}", lu[0], fd);
    }

    #[test]
    fn shift_subtracts_alpha_u_exactly() {
        let mlp = Mlp::new(&[2, 6, 1], 3).unwrap();
        let bc = BoundarySpec::DirichletHomogeneous;
        let trial = wrap_trial(&mlp, &bc, 2).unwrap();
        let pts = array![[0.2, 0.3], [0.9, 0.5], [0.45, 0.05]];
        for op in [
            OperatorSpec::neg_laplacian(),
            OperatorSpec::laplacian_plus_constant(100.0),
            OperatorSpec::fokker_planck(PotentialSpec::default_for_dim(2)),
        ] {
            let (u, base) = apply_operator_values(&op, &trial, pts.view(), mlp.params()).unwrap();
            let (_, shifted) =
                apply_operator_values(&op.clone().with_shift(7.5), &trial, pts.view(), mlp.params()).unwrap();
            for i in 0..3 {
                assert_eq!(shifted[i], base[i] - 7.5 * u[i]);
            }
        }
    }

    #[test]
    fn fokker_planck_annihilates_stationary_density() {
        let pot = PotentialSpec::new(vec![0.3, 0.8]).unwrap();
        let op = OperatorSpec::fokker_planck(pot.clone());
        let p2 = pot.clone();
        let trial = AnalyticTrial::new(2, move |t: &mut Tape, x: &[Var]| {
            let v = p2.build(t, x)?;
            let nv = t.neg(v);
            Ok(t.exp(nv))
        });
        let set = lhs_sample(100, &DomainBox::cube(2, 0.0, 2.0 * PI).unwrap(), 4).unwrap();
        let (_, lu) = apply_operator_values(&op, &trial, set.points().view(), &[]).unwrap();
        assert!(
            lu.iter().all(|r| r.abs() <= 1e-6),
            "{:?}",
            lu.iter().fold(0.0f64, |m, r| m.max(r.abs()))
        );
    }

    #[test]
    fn fokker_planck_matches_finite_difference_operator() {
        // independent check: apply the operator by nested central differences
        let pot = PotentialSpec::new(vec![0.6]).unwrap();
        let g = |x: f64| (x.sin() + 0.3 * (2.0 * x).cos()).exp();
        let v = |x: f64| (0.6 * x.cos()).sin();
        let h = 1e-4;
        let d1 = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = |f: &dyn Fn(f64) -> f64, x: f64| (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let x0 = 1.1;
        let fd = -d2(&g, x0) - d1(&v, x0) * d1(&g, x0) - d2(&v, x0) * g(x0);
        let trial = AnalyticTrial::new(1, |t: &mut Tape, x: &[Var]| {
            let s = t.sin(x[0]);
            let x2 = t.scale(x[0], 2.0);
            let c = t.cos(x2);
            let c3 = t.scale(c, 0.3);
            let arg = t.add(s, c3)?;
            Ok(t.exp(arg))
        });
        let pts = array![[x0]];
        let (_, lu) = apply_operator_values(&OperatorSpec::fokker_planck(pot), &trial, pts.view(), &[]).unwrap();
        assert!((lu[0] - fd).abs() < 1e-5 * fd.abs().max(1.0), "{} vs {}", lu[0], fd);
    }

    #[test]
    fn dirichlet_wrap_vanishes_on_boundary() {
        let mlp = Mlp::new(&[2, 8, 8, 1], 1).unwrap();
        let bc = BoundarySpec::DirichletHomogeneous;
        let trial = wrap_trial(&mlp, &bc, 2).unwrap();
        let pts = array![[0.0, 0.3], [1.0, 0.7], [0.4, 0.0], [0.2, 1.0], [0.0, 0.0]];
        let (u, _) = apply_operator_values(&OperatorSpec::neg_laplacian(), &trial, pts.view(), mlp.params()).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn general_dirichlet_matches_extension_on_boundary() {
        let mlp = Mlp::new(&[1, 5, 1], 2).unwrap();
        let bc = BoundarySpec::DirichletGeneral {
            distance: Arc::new(BoundarySpec::unit_box_distance),
            extension: Arc::new(|t: &mut Tape, x: &[Var]| Ok(t.square(x[0]))),
        };
        let trial = wrap_trial(&mlp, &bc, 1).unwrap();
        let pts = array![[0.0], [1.0]];
        let (u, _) = apply_operator_values(&OperatorSpec::neg_laplacian(), &trial, pts.view(), mlp.params()).unwrap();
        assert_eq!(u.to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn periodic_wrap_width_and_periodicity() {
        let mlp = Mlp::new(&[6, 20, 20, 20, 20, 1], 5).unwrap();
        let bc = BoundarySpec::periodic(1, 2.0 * PI, 3);
        assert_eq!(bc.network_input_width(1), 6);
        let trial = wrap_trial(&mlp, &bc, 1).unwrap();
        let xs = array![[0.3], [0.3 + 2.0 * PI], [4.0], [4.0 + 2.0 * PI]];
        let (u, _) = apply_operator_values(&OperatorSpec::neg_laplacian(), &trial, xs.view(), mlp.params()).unwrap();
        assert!((u[0] - u[1]).abs() < 1e-12);
        assert!((u[2] - u[3]).abs() < 1e-12);
    }

    #[test]
    fn width_mismatch_rejected() {
        let mlp = Mlp::new(&[5, 4, 1], 0).unwrap();
        let bc = BoundarySpec::periodic(1, 2.0 * PI, 3);
        match wrap_trial(&mlp, &bc, 1) {
            Err(Error::DimensionMismatch {
                expected: 6, actual: 5, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(wrap_trial(&mlp, &BoundarySpec::DirichletHomogeneous, 2).is_err());
    }

    #[test]
    fn rayleigh_of_exact_sine_is_pi_squared() {
        let set = lhs_sample(10_000, &DomainBox::unit(1).unwrap(), 0).unwrap();
        let rq = rayleigh_quotient(&OperatorSpec::neg_laplacian(), &sine_trial(1, 1.0), &set, &[]).unwrap();
        assert!((rq - 9.8696).abs() < 1e-3);
    }

    #[test]
    fn rayleigh_scale_invariance_and_shift() {
        let set = lhs_sample(64, &DomainBox::unit(2).unwrap(), 8).unwrap();
        let op = OperatorSpec::neg_laplacian();
        let trial = AnalyticTrial::new(2, |t: &mut Tape, x: &[Var]| {
            let phi = BoundarySpec::unit_box_distance(t, x)?;
            let e = t.exp(x[1]);
            t.mul(phi, e)
        });
        let base = rayleigh_quotient(&op, &trial, &set, &[]).unwrap();
        let shifted = rayleigh_quotient(&op.clone().with_shift(3.0), &trial, &set, &[]).unwrap();
        assert!((shifted - (base - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_trial_is_degenerate() {
        let set = lhs_sample(8, &DomainBox::unit(1).unwrap(), 0).unwrap();
        let trial = AnalyticTrial::new(1, |t: &mut Tape, x: &[Var]| Ok(t.scale(x[0], 0.0)));
        assert!(matches!(
            rayleigh_quotient(&OperatorSpec::neg_laplacian(), &trial, &set, &[]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn potential_validation_and_default() {
        assert!(PotentialSpec::new(vec![0.05]).is_err());
        assert!(PotentialSpec::new(vec![0.5, 1.2]).is_err());
        assert_eq!(PotentialSpec::default_for_dim(1).coefficients(), &[0.1]);
        let p = PotentialSpec::default_for_dim(4);
        assert!((p.coefficients()[3] - 1.0).abs() < 1e-15);
        assert!((p.coefficients()[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn exact_catalog() {
        let s = ExactSolution::ground_sine(2);
        assert!((s.eigenvalue(&OperatorKind::NegLaplacian).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        let c = s
            .eigenvalue(&OperatorKind::LaplacianPlusConstant { constant: 100.0 })
            .unwrap();
        assert!((c - 80.2608).abs() < 1e-4);
        assert!(ExactSolution::ExpNegPotential
            .eigenvalue(&OperatorKind::NegLaplacian)
            .is_err());
        let pts = Array2::from_shape_vec((1, 2), vec![0.5, 0.5]).unwrap();
        assert!((s.values(&OperatorKind::NegLaplacian, pts.view()).unwrap()[0] - 1.0).abs() < 1e-15);
    }
}
