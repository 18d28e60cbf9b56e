//! PMNN and IPMNN drivers, their losses, and the Adam optimizer.
//!
//! Both methods train one network whose output, composed with the boundary
//! treatment, is the current iterate of a power-type iteration:
//!
//! * PMNN fits `u` to the detached target `ℒu/‖ℒu‖`.
//! * IPMNN fits `ℒu/‖ℒu‖` to the previous iterate `T`, differentiating
//!   through the norm, and then refreshes `T = u/‖u‖`.
//!
//! Norms are discrete RMS norms over the fixed collocation set.

use std::path::Path;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::io::{fmt_num, write_csv};
use crate::network::Mlp;
use crate::problems::{
    apply_operator, rayleigh_from_values, wrap_trial, BoundarySpec, ExactSolution, OperatorSpec, TrialFunction,
};
use crate::sampling::{discrete_norm, lhs_sample, normalize, DomainBox, SampleSet};

/// Norms below this are treated as an annihilated trial.
pub const DEGENERACY_FLOOR: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pmnn,
    Ipmnn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub layer_sizes: Vec<usize>,
    pub n_samples: usize,
    pub epochs: usize,
    /// Stop once the loss drops below this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Treat `‖ℒu‖` as a constant in the IPMNN loss.
    #[serde(default)]
    pub detach_norm: bool,
}

fn default_lr() -> f64 {
    1e-3
}

fn default_record_every() -> usize {
    100
}

impl TrainConfig {
    pub fn new(method: Method, layer_sizes: Vec<usize>, n_samples: usize, epochs: usize) -> Self {
        TrainConfig {
            method,
            layer_sizes,
            n_samples,
            epochs,
            epsilon: None,
            learning_rate: default_lr(),
            seed: 0,
            record_every: default_record_every(),
            detach_norm: false,
        }
    }

    /// Every violated constraint, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n_samples == 0 {
            out.push("n_samples must be at least 1".to_string());
        }
        if self.epochs == 0 {
            out.push("epochs must be at least 1".to_string());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            out.push(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.record_every == 0 {
            out.push("record_every must be at least 1".to_string());
        }
        if let Some(eps) = self.epsilon {
            if !(eps > 0.0) {
                out.push(format!("epsilon must be positive, got {eps}"));
            }
        }
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) || self.layer_sizes.last() != Some(&1) {
            out.push(format!(
                "layer_sizes {:?} need at least two positive widths ending in 1",
                self.layer_sizes
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::DimensionMismatch {
            expected: state.m.len(),
            actual: if params.len() != state.m.len() {
                params.len()
            } else {
                grads.len()
            },
            context: "adam parameter/gradient length",
        });
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Loss, gradient and Rayleigh quotient of one epoch, before the update.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Rayleigh quotient of the operator as given (including its shift).
    pub lambda: f64,
    /// Trial values at the sample points.
    pub u: Array1<f64>,
}

/// PMNN loss `mean((u - sg(ℒu/‖ℒu‖))²)` and its parameter gradient.
pub fn pmnn_loss(
    op: &OperatorSpec,
    trial: &dyn TrialFunction,
    points: ArrayView2<'_, f64>,
    params: &[f64],
) -> Result<LossEval> {
    let mut tape = Tape::with_arity(points, trial.dim(), params)?;
    let eval = apply_operator(op, trial, &mut tape)?;
    let p = tape.detach(eval.lu);
    let norm = tape.rms(p);
    check_norm(tape.scalar_value(norm), "‖ℒu‖")?;
    let target = tape.div(p, norm)?;
    let diff = tape.sub(eval.u, target)?;
    let sq = tape.square(diff);
    let loss = tape.mean(sq);
    finish(&tape, eval.u, eval.lu, loss)
}

/// IPMNN loss `mean((ℒu/‖ℒu‖ - T)²)` against a fixed target `T`.
pub fn ipmnn_loss(
    op: &OperatorSpec,
    trial: &dyn TrialFunction,
    points: ArrayView2<'_, f64>,
    params: &[f64],
    target: ArrayView1<'_, f64>,
    detach_norm: bool,
) -> Result<LossEval> {
    if target.len() != points.nrows() {
        return Err(Error::DimensionMismatch {
            expected: points.nrows(),
            actual: target.len(),
            context: "ipmnn target length",
        });
    }
    ipmnn_loss_impl(op, trial, points, params, Some(target), detach_norm)
}

/// With `target = None` the target is `u/‖u‖` of the current parameters,
/// which is exactly the refreshed target of the previous epoch.
fn ipmnn_loss_impl(
    op: &OperatorSpec,
    trial: &dyn TrialFunction,
    points: ArrayView2<'_, f64>,
    params: &[f64],
    target: Option<ArrayView1<'_, f64>>,
    detach_norm: bool,
) -> Result<LossEval> {
    let mut tape = Tape::with_arity(points, trial.dim(), params)?;
    let eval = apply_operator(op, trial, &mut tape)?;
    let target = match target {
        Some(t) => t.to_owned(),
        None => {
            let u = tape.column_values(eval.u);
            check_norm(discrete_norm(u.view()), "‖u‖")?;
            normalize(u.view())?
        }
    };
    let mut norm = tape.rms(eval.lu);
    check_norm(tape.scalar_value(norm), "‖ℒu‖")?;
    if detach_norm {
        norm = tape.detach(norm);
    }
    let q = tape.div(eval.lu, norm)?;
    let t = tape.column(target)?;
    let diff = tape.sub(q, t)?;
    let sq = tape.square(diff);
    let loss = tape.mean(sq);
    finish(&tape, eval.u, eval.lu, loss)
}

fn check_norm(norm: f64, what: &str) -> Result<()> {
    if !(norm >= DEGENERACY_FLOOR) {
        return Err(Error::Degenerate(format!(
            "{what} = {norm:e} is below {DEGENERACY_FLOOR:e}"
        )));
    }
    Ok(())
}

fn finish(
    tape: &Tape,
    u: crate::autodiff::Var,
    lu: crate::autodiff::Var,
    loss: crate::autodiff::Var,
) -> Result<LossEval> {
    let grad = tape.param_gradient(loss)?;
    let uv = tape.column_values(u);
    let luv = tape.column_values(lu);
    let lambda = rayleigh_from_values(uv.view(), luv.view()).unwrap_or(f64::NAN);
    Ok(LossEval {
        loss: tape.scalar_value(loss),
        grad,
        lambda,
        u: uv,
    })
}

/// Values of the wrapped trial at every sample point.
pub fn trial_values(mlp: &Mlp, bc: &BoundarySpec, points: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let trial = wrap_trial(mlp, bc, points.ncols())?;
    let mut tape = Tape::with_arity(points, points.ncols(), mlp.params())?;
    let x = tape.inputs();
    let u = trial.build(&mut tape, &x)?;
    Ok(tape.column_values(u))
}

/// Loss and pre-update Rayleigh quotient of a finished epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub lambda: f64,
}

/// One PMNN epoch: loss against the detached power-map target, one Adam step.
pub fn pmnn_epoch(
    mlp: &mut Mlp,
    op: &OperatorSpec,
    bc: &BoundarySpec,
    samples: &SampleSet,
    adam: &mut AdamState,
    lr: f64,
) -> Result<EpochStats> {
    let eval = {
        let trial = wrap_trial(mlp, bc, samples.dim())?;
        pmnn_loss(op, &trial, samples.points().view(), mlp.params())?
    };
    adam_step(adam, mlp.params_mut(), &eval.grad, lr)?;
    Ok(EpochStats {
        loss: eval.loss,
        lambda: eval.lambda,
    })
}

/// One IPMNN epoch. Returns the statistics and the refreshed target
/// `u/‖u‖` of the updated network.
#[allow(clippy::too_many_arguments)]
pub fn ipmnn_epoch(
    mlp: &mut Mlp,
    op: &OperatorSpec,
    bc: &BoundarySpec,
    samples: &SampleSet,
    adam: &mut AdamState,
    lr: f64,
    target: ArrayView1<'_, f64>,
    detach_norm: bool,
) -> Result<(EpochStats, Array1<f64>)> {
    let eval = {
        let trial = wrap_trial(mlp, bc, samples.dim())?;
        ipmnn_loss(op, &trial, samples.points().view(), mlp.params(), target, detach_norm)?
    };
    adam_step(adam, mlp.params_mut(), &eval.grad, lr)?;
    let u = trial_values(mlp, bc, samples.points().view())?;
    check_norm(discrete_norm(u.view()), "‖u‖")?;
    let next = normalize(u.view())?;
    Ok((
        EpochStats {
            loss: eval.loss,
            lambda: eval.lambda,
        },
        next,
    ))
}

/// One row of the training trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Rayleigh quotient of the unshifted operator.
    pub lambda: f64,
    pub lambda_err_max: Option<f64>,
    pub u_err_max: Option<f64>,
}

pub const ITERATION_CSV_HEADER: [&str; 5] = ["epoch", "loss", "lambda", "lambda_err_max", "u_err_max"];

impl IterationRecord {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        format!(
            "{},{},{},{},{}",
            self.epoch,
            fmt_num(self.loss),
            fmt_num(self.lambda),
            opt(self.lambda_err_max),
            opt(self.u_err_max)
        )
    }
}

pub fn write_iterations_csv(path: &Path, records: &[IterationRecord]) -> Result<()> {
    write_csv(
        path,
        &ITERATION_CSV_HEADER,
        records.iter().map(IterationRecord::csv_row),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenEstimate {
    pub lambda: f64,
    /// Eigenfunction samples on the collocation set, unit discrete norm.
    pub eigenfunction: Array1<f64>,
    pub final_loss: f64,
    pub epochs: usize,
}

/// An eigenvalue problem: operator, boundary treatment and domain.
#[derive(Clone, Debug)]
pub struct Problem {
    pub op: OperatorSpec,
    pub bc: BoundarySpec,
    pub domain: DomainBox,
}

impl Problem {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }
}

/// Known eigenpair of the unshifted operator.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactReference {
    pub lambda: f64,
    pub solution: ExactSolution,
}

/// Everything a finished solver run produced.
#[derive(Clone, Debug)]
pub struct SolverRun {
    pub estimate: EigenEstimate,
    pub records: Vec<IterationRecord>,
    pub mlp: Mlp,
    pub samples: SampleSet,
}

/// Flips `pred` in place if it points away from `exact`.
pub fn align_sign(pred: &mut Array1<f64>, exact: ArrayView1<'_, f64>) {
    let dot: f64 = pred.iter().zip(exact.iter()).map(|(a, b)| a * b).sum();
    if dot < 0.0 {
        pred.mapv_inplace(|v| -v);
    }
}

/// Max-norm distance after normalizing both and aligning signs.
pub fn eigenfunction_error(pred: ArrayView1<'_, f64>, exact: ArrayView1<'_, f64>) -> Result<f64> {
    let mut p = normalize(pred)?;
    let e = normalize(exact)?;
    align_sign(&mut p, e.view());
    Ok(p.iter().zip(e.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
}

/// Network seed derived from the run seed, distinct from the sampling seed.
pub fn network_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Runs PMNN or IPMNN on Latin hypercube samples drawn from the problem box.
pub fn run_solver(config: &TrainConfig, problem: &Problem, exact: Option<&ExactReference>) -> Result<SolverRun> {
    config.validate()?;
    let samples = lhs_sample(config.n_samples, &problem.domain, config.seed)?;
    run_solver_on(config, problem, samples, exact, &mut |_| {})
}

/// Runs the solver on a caller-provided collocation set, reporting every
/// recorded row to `on_record`.
pub fn run_solver_on(
    config: &TrainConfig,
    problem: &Problem,
    samples: SampleSet,
    exact: Option<&ExactReference>,
    on_record: &mut dyn FnMut(&IterationRecord),
) -> Result<SolverRun> {
    config.validate()?;
    if samples.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            actual: samples.dim(),
            context: "sample set vs problem dimension",
        });
    }
    let mut mlp = Mlp::new(&config.layer_sizes, network_seed(config.seed))?;
    wrap_trial(&mlp, &problem.bc, problem.dim())?;
    let exact_values = match exact {
        Some(e) => Some(normalize(
            e.solution.values(&problem.op.kind, samples.points().view())?.view(),
        )?),
        None => None,
    };
    let shift = problem.op.shift;
    let lr = config.learning_rate;
    let points = samples.points().view();
    let mut adam = AdamState::new(mlp.param_count());
    let initial_target = normalize(Array1::from_elem(samples.len(), 1.0).view())?;
    let mut records = Vec::new();
    let mut last_loss = f64::NAN;
    let mut epochs_run = 0;

    for epoch in 0..config.epochs {
        let eval = {
            let trial = wrap_trial(&mlp, &problem.bc, problem.dim())?;
            match config.method {
                Method::Pmnn => pmnn_loss(&problem.op, &trial, points, mlp.params()),
                Method::Ipmnn => {
                    let target = (epoch == 0).then(|| initial_target.view());
                    ipmnn_loss_impl(&problem.op, &trial, points, mlp.params(), target, config.detach_norm)
                }
            }
        }
        .map_err(|e| match e {
            Error::Degenerate(reason) => Error::DegenerateEpoch { epoch, reason },
            other => other,
        })?;
        let lambda = eval.lambda + shift;
        if !eval.loss.is_finite() || !lambda.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                loss: eval.loss,
                lambda,
            });
        }
        adam_step(&mut adam, mlp.params_mut(), &eval.grad, lr)?;
        last_loss = eval.loss;
        epochs_run = epoch + 1;
        let stop = config.epsilon.is_some_and(|eps| eval.loss < eps);
        if epoch % config.record_every == 0 || epoch + 1 == config.epochs || stop {
            let (lambda_err_max, u_err_max) = match (exact, &exact_values) {
                (Some(e), Some(ev)) => (
                    Some((lambda - e.lambda).abs()),
                    eigenfunction_error(eval.u.view(), ev.view()).ok(),
                ),
                _ => (None, None),
            };
            let rec = IterationRecord {
                epoch,
                loss: eval.loss,
                lambda,
                lambda_err_max,
                u_err_max,
            };
            on_record(&rec);
            records.push(rec);
        }
        if stop {
            break;
        }
    }

    let estimate = estimate_from(&mlp, problem, &samples, exact_values.as_ref(), last_loss, epochs_run)?;
    Ok(SolverRun {
        estimate,
        records,
        mlp,
        samples,
    })
}

fn estimate_from(
    mlp: &Mlp,
    problem: &Problem,
    samples: &SampleSet,
    exact_values: Option<&Array1<f64>>,
    final_loss: f64,
    epochs: usize,
) -> Result<EigenEstimate> {
    let trial = wrap_trial(mlp, &problem.bc, problem.dim())?;
    let (u, lu) =
        crate::problems::apply_operator_values(&problem.unshifted_op(), &trial, samples.points().view(), mlp.params())?;
    let lambda = rayleigh_from_values(u.view(), lu.view())?;
    let mut eigenfunction = normalize(u.view())?;
    if let Some(ev) = exact_values {
        align_sign(&mut eigenfunction, ev.view());
    }
    Ok(EigenEstimate {
        lambda,
        eigenfunction,
        final_loss,
        epochs,
    })
}

impl Problem {
    fn unshifted_op(&self) -> OperatorSpec {
        self.op.unshifted()
    }
}

/// IPMNN on `ℒ - αI`; the reported eigenvalue belongs to `ℒ`.
pub fn solve_interior(
    config: &TrainConfig,
    base_op: &OperatorSpec,
    alpha: f64,
    bc: &BoundarySpec,
    domain: &DomainBox,
    exact: Option<&ExactReference>,
) -> Result<SolverRun> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("shift must be finite, got {alpha}")));
    }
    let mut cfg = config.clone();
    cfg.method = Method::Ipmnn;
    let problem = Problem {
        op: base_op.clone().with_shift(alpha),
        bc: bc.clone(),
        domain: domain.clone(),
    };
    run_solver(&cfg, &problem, exact)
}
