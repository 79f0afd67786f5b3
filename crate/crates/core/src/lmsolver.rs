//! Bounded Levenberg-Marquardt with a forward finite-difference Jacobian.
//!
//! The iteration is
//!
//! ```text
//! Δx = -(JᵀJ + μ·diag(JᵀJ))⁻¹ Jᵀ r,    x ← x + Δx
//! ```
//!
//! Every in-bounds proposal is accepted. A proposal that leaves the open box
//! `lower < x < upper` is declined, `μ` is doubled and a new step is solved
//! from the same `J` and `r` without new model evaluations. Once
//! `μ > μ₀ · mu_blowup` the run stops without a result.
//!
//! `μ` adapts only after an improving iteration (both `err_grad` and
//! `err_res` decreased), by the ratio of successive `err_grad` values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, Matrix, SolveError};
use crate::scalar::Scalar;

/// Failure of a forward-model evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ModelFailure(pub String);

impl ModelFailure {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LmError {
    #[error("perturbation of parameter {0} underflows")]
    PerturbationUnderflow(usize),
    #[error("both perturbation directions of parameter {0} leave the bounds")]
    PerturbationOutOfBounds(usize),
    #[error("model evaluation failed at {}: {source}", .at.map_or("the current iterate".to_string(), |i| format!("perturbed parameter {i}")))]
    ModelFailure { at: Option<usize>, source: ModelFailure },
    #[error("damped normal equations are singular: {0}")]
    SingularSystem(SolveError),
    #[error("invalid parameter spec: {0}")]
    InvalidSpec(String),
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("initial guess is not strictly inside the bounds (parameter {0})")]
    InitialGuessOutOfBounds(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Something that maps a parameter vector to a residual vector.
///
/// Must be re-entrant: Jacobian columns may be evaluated concurrently.
pub trait ResidualFn<F>: Sync {
    fn residual(&self, x: &[F]) -> Result<Vec<F>, ModelFailure>;
}

impl<F, T> ResidualFn<F> for T
where
    T: Fn(&[F]) -> Result<Vec<F>, ModelFailure> + Sync,
{
    fn residual(&self, x: &[F]) -> Result<Vec<F>, ModelFailure> {
        self(x)
    }
}

fn checked_residual<F: Scalar, R: ResidualFn<F> + ?Sized>(f: &R, x: &[F]) -> Result<Vec<F>, ModelFailure> {
    let r = f.residual(x)?;
    if r.is_empty() {
        return Err(ModelFailure::new("empty residual vector"));
    }
    if let Some(j) = r.iter().position(|v| !v.is_finite()) {
        return Err(ModelFailure::new(format!("residual component {j} is not finite")));
    }
    Ok(r)
}

/// Names and open box bounds of the identified parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec<F> {
    names: Vec<String>,
    lower: Vec<F>,
    upper: Vec<F>,
    units: Vec<String>,
}

impl<F: Scalar> ParameterSpec<F> {
    pub fn new(names: Vec<String>, lower: Vec<F>, upper: Vec<F>, units: Vec<String>) -> Result<Self, LmError> {
        let n = names.len();
        if n == 0 {
            return Err(LmError::InvalidSpec("no parameters".into()));
        }
        if lower.len() != n || upper.len() != n || units.len() != n {
            return Err(LmError::InvalidSpec("names, bounds and units differ in length".into()));
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(LmError::InvalidSpec(format!("duplicate parameter name `{name}`")));
            }
            if !(lower[i] < upper[i]) {
                return Err(LmError::InvalidSpec(format!("`{name}`: lower bound must be below upper bound")));
            }
        }
        Ok(Self {
            names,
            lower,
            upper,
            units,
        })
    }

    /// Spec with unit-less parameters.
    pub fn unitless(names: &[&str], lower: Vec<F>, upper: Vec<F>) -> Result<Self, LmError> {
        Self::new(
            names.iter().map(|s| s.to_string()).collect(),
            lower,
            upper,
            vec![String::new(); names.len()],
        )
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lower(&self) -> &[F] {
        &self.lower
    }

    pub fn upper(&self) -> &[F] {
        &self.upper
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    #[inline]
    pub fn inside(&self, i: usize, v: F) -> bool {
        v > self.lower[i] && v < self.upper[i]
    }

    /// Index of the first component not strictly inside its bounds.
    pub fn first_violation(&self, x: &[F]) -> Option<usize> {
        (0..self.len()).find(|&i| !self.inside(i, x[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LmConfig<F> {
    /// Absolute finite-difference perturbation.
    pub alpha: F,
    /// Relative finite-difference perturbation.
    pub beta: F,
    pub mu0: F,
    pub eps_grad: F,
    /// Residual-error tolerance in mm; `0` disables it.
    pub eps_res: F,
    pub n_max: usize,
    pub mu_blowup: F,
    /// Evaluate Jacobian columns on the rayon pool.
    pub parallel: bool,
}

impl<F: Scalar> Default for LmConfig<F> {
    fn default() -> Self {
        Self {
            alpha: F::of(1e-5),
            beta: F::of(1e-3),
            mu0: F::of(1e-3),
            eps_grad: F::of(1e-8),
            eps_res: F::zero(),
            n_max: 100,
            mu_blowup: F::of(1e6),
            parallel: false,
        }
    }
}

impl<F: Scalar> LmConfig<F> {
    pub fn validate(&self) -> Result<(), LmError> {
        let bad = |m: &str| Err(LmError::InvalidConfig(m.to_string()));
        if !(self.alpha >= F::zero()) || !(self.beta >= F::zero()) {
            return bad("alpha and beta must be non-negative");
        }
        if !(self.alpha + self.beta > F::zero()) {
            return bad("alpha + beta must be positive");
        }
        if !(self.mu0 > F::zero()) || !self.mu0.is_finite() {
            return bad("mu0 must be positive");
        }
        if !(self.eps_grad >= F::zero()) || !(self.eps_res >= F::zero()) {
            return bad("tolerances must be non-negative");
        }
        if self.n_max < 1 {
            return bad("n_max must be at least 1");
        }
        if !(self.mu_blowup > F::one()) {
            return bad("mu_blowup must exceed 1");
        }
        Ok(())
    }
}

/// Copy of `x` with component `i` moved by `α + β·xᵢ`, and that step.
pub fn perturb<F: Scalar>(x: &[F], i: usize, alpha: F, beta: F) -> Result<(Vec<F>, F), LmError> {
    if i >= x.len() {
        return Err(LmError::DimensionMismatch(format!("parameter index {i} >= {}", x.len())));
    }
    let delta = alpha + beta * x[i];
    if !(delta.abs() >= F::tiny()) {
        return Err(LmError::PerturbationUnderflow(i));
    }
    let mut xp = x.to_vec();
    xp[i] = x[i] + delta;
    Ok((xp, delta))
}

/// Finite-difference Jacobian together with the step actually taken per column.
#[derive(Debug, Clone)]
pub struct FdJacobian<F> {
    pub matrix: Matrix<F>,
    pub steps: Vec<F>,
    /// Columns whose perturbation was mirrored to stay inside the bounds.
    pub flipped: Vec<usize>,
}

fn jacobian_impl<F: Scalar, R: ResidualFn<F> + ?Sized>(
    f: &R,
    x: &[F],
    r_at_x: &[F],
    alpha: F,
    beta: F,
    bounds: Option<&ParameterSpec<F>>,
    parallel: bool,
) -> Result<FdJacobian<F>, LmError> {
    let n = x.len();
    let mut points = Vec::with_capacity(n);
    let mut flipped = Vec::new();
    for i in 0..n {
        let (mut xp, mut delta) = perturb(x, i, alpha, beta)?;
        if let Some(spec) = bounds {
            if !spec.inside(i, xp[i]) {
                delta = -delta;
                xp[i] = x[i] + delta;
                if !spec.inside(i, xp[i]) {
                    return Err(LmError::PerturbationOutOfBounds(i));
                }
                flipped.push(i);
            }
        }
        points.push((xp, delta));
    }

    let column = |(i, (xp, delta)): (usize, &(Vec<F>, F))| -> Result<Vec<F>, LmError> {
        let rp = checked_residual(f, xp).map_err(|source| LmError::ModelFailure { at: Some(i), source })?;
        if rp.len() != r_at_x.len() {
            return Err(LmError::ModelFailure {
                at: Some(i),
                source: ModelFailure::new("residual length changed under perturbation"),
            });
        }
        Ok(rp.iter().zip(r_at_x).map(|(a, b)| (*a - *b) / *delta).collect())
    };

    let cols: Vec<Vec<F>> = if parallel {
        points.par_iter().enumerate().map(column).collect::<Result<_, _>>()?
    } else {
        points.iter().enumerate().map(column).collect::<Result<_, _>>()?
    };
    Ok(FdJacobian {
        matrix: Matrix::from_columns(&cols),
        steps: points.into_iter().map(|(_, d)| d).collect(),
        flipped,
    })
}

/// Forward-difference Jacobian `J[j][i] = (r_j(x + δᵢeᵢ) − r_j(x)) / δᵢ`.
pub fn fd_jacobian<F: Scalar, R: ResidualFn<F> + ?Sized>(
    f: &R,
    x: &[F],
    r_at_x: &[F],
    alpha: F,
    beta: F,
) -> Result<Matrix<F>, LmError> {
    jacobian_impl(f, x, r_at_x, alpha, beta, None, false).map(|j| j.matrix)
}

/// Like [`fd_jacobian`] but mirrors any perturbation that would leave the
/// bounds, and optionally evaluates the columns in parallel.
pub fn fd_jacobian_bounded<F: Scalar, R: ResidualFn<F> + ?Sized>(
    f: &R,
    x: &[F],
    r_at_x: &[F],
    alpha: F,
    beta: F,
    spec: &ParameterSpec<F>,
    parallel: bool,
) -> Result<FdJacobian<F>, LmError> {
    jacobian_impl(f, x, r_at_x, alpha, beta, Some(spec), parallel)
}

/// Diagonal entries of `JᵀJ` are floored here before damping.
pub const DIAGONAL_FLOOR: f64 = 1e-30;

/// Solves `(JᵀJ + μ·diag(JᵀJ)) Δx = −Jᵀr`.
pub fn lm_step<F: Scalar>(j: &Matrix<F>, r: &[F], mu: F) -> Result<Vec<F>, LmError> {
    if j.rows() != r.len() {
        return Err(LmError::DimensionMismatch(format!("J has {} rows, r has {}", j.rows(), r.len())));
    }
    let mut a = j.gram();
    let floor = F::of(DIAGONAL_FLOOR);
    for i in 0..a.rows() {
        let d = a[(i, i)].max(floor);
        a[(i, i)] += mu * d;
    }
    let rhs: Vec<F> = j.tr_mul_vec(r).into_iter().map(|v| -v).collect();
    linalg::solve_checked(&a, &rhs).map_err(LmError::SingularSystem)
}

/// `‖Jᵀr‖₂`
pub fn err_grad<F: Scalar>(j: &Matrix<F>, r: &[F]) -> F {
    linalg::norm2(&j.tr_mul_vec(r))
}

/// `‖r‖₂ / √n_r`
pub fn err_res<F: Scalar>(r: &[F]) -> F {
    if r.is_empty() {
        return F::zero();
    }
    linalg::norm2(r) / F::from_usize(r.len()).expect("length fits scalar").sqrt()
}

/// `μ·err_gradᵏ/err_gradᵏ⁻¹` after an improving iteration, otherwise `μ`.
pub fn update_mu<F: Scalar>(mu: F, err_grad_k: F, err_grad_km1: F, improved: bool) -> F {
    if improved && err_grad_km1 > F::zero() {
        mu * err_grad_k / err_grad_km1
    } else {
        mu
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LmStatus {
    ConvergedGrad,
    ConvergedRes,
    MaxIterations,
    MuBlowup,
    ModelFailure,
}

impl LmStatus {
    pub fn is_converged(self) -> bool {
        matches!(self, Self::ConvergedGrad | Self::ConvergedRes)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConvergedGrad => "converged_grad",
            Self::ConvergedRes => "converged_res",
            Self::MaxIterations => "max_iterations",
            Self::MuBlowup => "mu_blowup",
            Self::ModelFailure => "model_failure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Accepted,
    DeclinedBounds,
    Terminated,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Accepted => "accepted",
            Self::DeclinedBounds => "declined_bounds",
            Self::Terminated => "terminated",
        }
    }
}

/// One proposal (or the terminal state) of a run.
///
/// `x`, `residual`, `err_res` and `err_grad` describe the iterate `xᵏ`;
/// `mu` is the damping used for `proposal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord<F> {
    pub k: usize,
    pub status: StepStatus,
    pub mu: F,
    pub err_res: Option<F>,
    pub err_grad: Option<F>,
    pub x: Vec<F>,
    pub residual: Vec<F>,
    pub proposal: Option<Vec<F>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flipped_perturbations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmResult<F> {
    pub status: LmStatus,
    /// Last accepted iterate. Not a result when `status` is `mu_blowup` or
    /// `model_failure`.
    pub x: Vec<F>,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<TraceRecord<F>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl<F: Scalar> LmResult<F> {
    pub fn final_record(&self) -> &TraceRecord<F> {
        self.trace.last().expect("trace has a terminal record")
    }

    pub fn final_err_res(&self) -> Option<F> {
        self.final_record().err_res
    }

    pub fn final_err_grad(&self) -> Option<F> {
        self.final_record().err_grad
    }
}

struct Iterate<F> {
    k: usize,
    x: Vec<F>,
    r: Vec<F>,
    err_res: F,
    err_grad: Option<F>,
}

impl<F: Scalar> Iterate<F> {
    fn record(&self, status: StepStatus, mu: F, proposal: Option<Vec<F>>, flipped: &[usize]) -> TraceRecord<F> {
        TraceRecord {
            k: self.k,
            status,
            mu,
            err_res: Some(self.err_res),
            err_grad: self.err_grad,
            x: self.x.clone(),
            residual: self.r.clone(),
            proposal,
            flipped_perturbations: flipped.to_vec(),
        }
    }
}

/// Runs the bounded optimizer from `x0`.
///
/// Model failures end the run with status `model_failure`; invalid inputs and
/// singular damped systems are returned as errors.
pub fn run<F: Scalar, R: ResidualFn<F> + ?Sized>(
    f: &R,
    x0: &[F],
    spec: &ParameterSpec<F>,
    config: &LmConfig<F>,
) -> Result<LmResult<F>, LmError> {
    config.validate()?;
    if x0.len() != spec.len() {
        return Err(LmError::DimensionMismatch(format!(
            "initial guess has {} entries, spec has {}",
            x0.len(),
            spec.len()
        )));
    }
    if let Some(i) = spec.first_violation(x0) {
        return Err(LmError::InitialGuessOutOfBounds(i));
    }

    let mut trace = Vec::new();
    let mut evaluations = 1;
    let mut mu = config.mu0;
    let mu_limit = config.mu0 * config.mu_blowup;

    let finish = |status: LmStatus, x: Vec<F>, k: usize, evaluations: usize, trace: Vec<TraceRecord<F>>, failure| {
        Ok(LmResult {
            status,
            x,
            iterations: k,
            evaluations,
            trace,
            failure,
        })
    };

    let r0 = match checked_residual(f, x0) {
        Ok(r) => r,
        Err(e) => {
            trace.push(TraceRecord {
                k: 0,
                status: StepStatus::Terminated,
                mu,
                err_res: None,
                err_grad: None,
                x: x0.to_vec(),
                residual: Vec::new(),
                proposal: None,
                flipped_perturbations: Vec::new(),
            });
            return finish(LmStatus::ModelFailure, x0.to_vec(), 0, evaluations, trace, Some(e.to_string()));
        }
    };
    let mut it = Iterate {
        k: 0,
        x: x0.to_vec(),
        err_res: err_res(&r0),
        r: r0,
        err_grad: None,
    };
    let mut previous: Option<(F, F)> = None;

    loop {
        if it.err_res < config.eps_res {
            trace.push(it.record(StepStatus::Terminated, mu, None, &[]));
            return finish(LmStatus::ConvergedRes, it.x, it.k, evaluations, trace, None);
        }

        let jac = match fd_jacobian_bounded(f, &it.x, &it.r, config.alpha, config.beta, spec, config.parallel) {
            Ok(j) => {
                evaluations += spec.len();
                j
            }
            Err(LmError::ModelFailure { at, source }) => {
                // every column up to the failing one was attempted
                evaluations += at.map_or(spec.len(), |i| i + 1);
                trace.push(it.record(StepStatus::Terminated, mu, None, &[]));
                let msg = LmError::ModelFailure { at, source }.to_string();
                return finish(LmStatus::ModelFailure, it.x, it.k, evaluations, trace, Some(msg));
            }
            Err(e) => return Err(e),
        };
        let grad = err_grad(&jac.matrix, &it.r);
        it.err_grad = Some(grad);
        if let Some((prev_grad, prev_res)) = previous {
            let improved = grad < prev_grad && it.err_res < prev_res;
            mu = update_mu(mu, grad, prev_grad, improved);
        }

        if grad < config.eps_grad {
            trace.push(it.record(StepStatus::Terminated, mu, None, &jac.flipped));
            return finish(LmStatus::ConvergedGrad, it.x, it.k, evaluations, trace, None);
        }
        if it.k > config.n_max {
            trace.push(it.record(StepStatus::Terminated, mu, None, &jac.flipped));
            return finish(LmStatus::MaxIterations, it.x, it.k, evaluations, trace, None);
        }

        let proposal = loop {
            let dx = lm_step(&jac.matrix, &it.r, mu)?;
            let candidate: Vec<F> = it.x.iter().zip(&dx).map(|(a, b)| *a + *b).collect();
            if spec.first_violation(&candidate).is_none() {
                trace.push(it.record(StepStatus::Accepted, mu, Some(candidate.clone()), &jac.flipped));
                break candidate;
            }
            trace.push(it.record(StepStatus::DeclinedBounds, mu, Some(candidate), &jac.flipped));
            mu = mu + mu;
            if mu > mu_limit {
                trace.push(it.record(StepStatus::Terminated, mu, None, &[]));
                return finish(LmStatus::MuBlowup, it.x, it.k, evaluations, trace, None);
            }
        };

        evaluations += 1;
        let r_next = match checked_residual(f, &proposal) {
            Ok(r) => r,
            Err(e) => {
                trace.push(TraceRecord {
                    k: it.k + 1,
                    status: StepStatus::Terminated,
                    mu,
                    err_res: None,
                    err_grad: None,
                    x: proposal.clone(),
                    residual: Vec::new(),
                    proposal: None,
                    flipped_perturbations: Vec::new(),
                });
                // the failing point is not a usable iterate
                return finish(LmStatus::ModelFailure, it.x, it.k, evaluations, trace, Some(e.to_string()));
            }
        };
        if r_next.len() != it.r.len() {
            return Err(LmError::DimensionMismatch("residual length changed between iterates".into()));
        }
        previous = Some((grad, it.err_res));
        it = Iterate {
            k: it.k + 1,
            x: proposal,
            err_res: err_res(&r_next),
            r: r_next,
            err_grad: None,
        };
    }
}
