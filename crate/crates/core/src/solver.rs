//! Iteratively reweighted nuclear norm (IRNN).
//!
//! Each iteration linearizes the loss at `X^k`, adds a proximal term with
//! constant `mu > L(f)` and solves the resulting weighted nuclear norm
//! problem in closed form:
//!
//! ```text
//! X^{k+1} = WSVT(X^k - grad f(X^k) / mu,  w^k / mu)
//! w^{k+1}_i in  superdifferential of g_lambda at sigma_i(X^{k+1})
//! ```
//!
//! With `lambda` fixed, `F(X) = sum_i g(sigma_i(X)) + f(X)` then satisfies
//! `F(X^k) - F(X^{k+1}) >= (mu - L)/2 ||X^k - X^{k+1}||_F^2`, which the solver
//! checks at run time.

use std::fmt;
use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::losses::{CompletionProblem, SmoothLoss};
use crate::penalties::Penalty;
use crate::wsvt::{self, Thresholded, WeightVector};

/// Absolute floor of the slack allowed in the run-time descent check; it
/// grows with `|F|` to absorb rounding on large objectives.
pub const DESCENT_SLACK: f64 = 1e-8;

/// Default proximal constant for completion, where `L(f) = 1`.
pub const COMPLETION_MU: f64 = 1.1;

/// Default stage exit for the completion presets, relative to
/// `||P_Omega(M)||_F`.
pub const STAGE_STEP: f64 = 1e-3;

/// Default cap on the length of one continuation stage.
pub const STAGE_ITERS: usize = 200;

/// How the regularization strength evolves over iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaSchedule {
    /// The penalty's own lambda, every iteration.
    Fixed,
    /// `lambda_k = max(eta^k * lambda0, target)`: one decrease per iteration.
    Continuation { lambda0: f64, eta: f64, target: f64 },
    /// Warm-started stages: lambda stays put until `||X^{k+1} - X^k||_F <=
    /// stage_step` (or `stage_iters` iterations pass), then becomes
    /// `max(eta * lambda, target)`.
    Staged {
        lambda0: f64,
        eta: f64,
        target: f64,
        stage_step: f64,
        stage_iters: usize,
    },
}

impl LambdaSchedule {
    pub fn validate(&self) -> Result<()> {
        let (lambda0, eta, target) = match *self {
            LambdaSchedule::Fixed => return Ok(()),
            LambdaSchedule::Continuation {
                lambda0,
                eta,
                target,
            } => (lambda0, eta, target),
            LambdaSchedule::Staged {
                lambda0,
                eta,
                target,
                stage_step,
                stage_iters,
            } => {
                if stage_step.is_nan() || stage_step < 0.0 {
                    return Err(Error::Config(format!(
                        "stage_step must be nonnegative, got {stage_step}"
                    )));
                }
                if stage_iters == 0 {
                    return Err(Error::Config("stage_iters must be positive".into()));
                }
                (lambda0, eta, target)
            }
        };
        if !(lambda0.is_finite() && lambda0 > 0.0) {
            return Err(Error::Config(format!(
                "lambda0 must be positive, got {lambda0}"
            )));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1), got {eta}")));
        }
        if !(target > 0.0 && target <= lambda0) {
            return Err(Error::Config(format!(
                "lambda target must lie in (0, lambda0 = {lambda0}], got {target}"
            )));
        }
        Ok(())
    }

    /// Lambda of the first iteration; `base` is used by `Fixed`.
    pub fn initial(&self, base: f64) -> f64 {
        match *self {
            LambdaSchedule::Fixed => base,
            LambdaSchedule::Continuation { lambda0, .. }
            | LambdaSchedule::Staged { lambda0, .. } => lambda0,
        }
    }

    fn target(&self, base: f64) -> f64 {
        match *self {
            LambdaSchedule::Fixed => base,
            LambdaSchedule::Continuation { target, .. } | LambdaSchedule::Staged { target, .. } => {
                target
            }
        }
    }
}

/// Walks a [`LambdaSchedule`] alongside the iterations of a solve.
#[derive(Debug, Clone)]
pub(crate) struct LambdaTracker {
    schedule: LambdaSchedule,
    target: f64,
    lambda: f64,
    iteration: usize,
    stage_len: usize,
}

impl LambdaTracker {
    pub(crate) fn new(schedule: LambdaSchedule, base: f64) -> Self {
        LambdaTracker {
            schedule,
            target: schedule.target(base),
            lambda: schedule.initial(base),
            iteration: 0,
            stage_len: 0,
        }
    }

    pub(crate) fn lambda(&self) -> f64 {
        self.lambda
    }

    pub(crate) fn settled(&self) -> bool {
        self.lambda <= self.target
    }

    /// Records an iteration with step norm `step`; returns true if lambda
    /// changed for the next one.
    pub(crate) fn advance(&mut self, step: f64) -> bool {
        self.iteration += 1;
        self.stage_len += 1;
        let next = match self.schedule {
            LambdaSchedule::Fixed => self.lambda,
            LambdaSchedule::Continuation {
                lambda0,
                eta,
                target,
            } => {
                let exponent = i32::try_from(self.iteration).unwrap_or(i32::MAX);
                (eta.powi(exponent) * lambda0).max(target)
            }
            LambdaSchedule::Staged {
                eta,
                target,
                stage_step,
                stage_iters,
                ..
            } => {
                if step <= stage_step || self.stage_len >= stage_iters {
                    (eta * self.lambda).max(target)
                } else {
                    self.lambda
                }
            }
        };
        let changed = next != self.lambda;
        if changed {
            self.stage_len = 0;
        }
        self.lambda = next;
        changed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Proximal constant; must exceed the loss's Lipschitz constant.
    pub mu: f64,
    pub schedule: LambdaSchedule,
    pub max_iters: usize,
    /// Stop once `loss.residual_norm(X) <= stop_residual`.
    pub stop_residual: Option<f64>,
    /// Stop once `||X^{k+1} - X^k||_F <= stop_step` with lambda settled.
    pub stop_step: Option<f64>,
    /// Overrides the initial weights (default: `lambda_0` everywhere).
    pub initial_weights: Option<WeightVector>,
    /// Fail with [`Error::DescentViolation`] if the sufficient-decrease
    /// inequality breaks.
    pub check_descent: bool,
}

impl SolverConfig {
    /// Fixed lambda, `mu = 1.1`, step-norm stopping.
    pub fn fixed(max_iters: usize, stop_step: f64) -> Self {
        SolverConfig {
            mu: COMPLETION_MU,
            schedule: LambdaSchedule::Fixed,
            max_iters,
            stop_residual: None,
            stop_step: Some(stop_step),
            initial_weights: None,
            check_descent: true,
        }
    }

    /// Noise-free completion: `lambda0 = ||P_Omega(M)||_inf`,
    /// `target = 1e-5 lambda0`, `eta = 0.7` in warm-started stages, stop at
    /// residual `1e-5`.
    pub fn noise_free(problem: &CompletionProblem) -> Self {
        let lambda0 = problem.observed_max_abs().max(f64::MIN_POSITIVE);
        SolverConfig {
            mu: COMPLETION_MU,
            schedule: LambdaSchedule::Staged {
                lambda0,
                eta: 0.7,
                target: 1e-5 * lambda0,
                stage_step: STAGE_STEP * problem.observed_norm(),
                stage_iters: STAGE_ITERS,
            },
            max_iters: 2000,
            stop_residual: Some(1e-5),
            stop_step: Some(1e-7 * problem.observed_norm()),
            initial_weights: None,
            check_descent: true,
        }
    }

    /// Noisy completion: `lambda0 = 10 ||P_Omega(M)||_inf`,
    /// `target = 0.1 lambda0`, `eta = 0.7` decreased every iteration, stop
    /// when the step falls below `1e-5 ||P_Omega(M)||_F`.
    ///
    /// The first step uses weights `target` rather than `lambda0`: a
    /// threshold of `lambda0 / mu` exceeds every singular value of
    /// `P_Omega(M)`, and the Lp weight at zero would then pin the iterate at
    /// zero for good.
    pub fn noisy(problem: &CompletionProblem) -> Self {
        let lambda0 = 10.0 * problem.observed_max_abs().max(f64::MIN_POSITIVE);
        let target = 0.1 * lambda0;
        let s = problem.nrows().min(problem.ncols());
        SolverConfig {
            mu: COMPLETION_MU,
            schedule: LambdaSchedule::Continuation {
                lambda0,
                eta: 0.7,
                target,
            },
            max_iters: 500,
            stop_residual: None,
            stop_step: Some(1e-5 * problem.observed_norm()),
            initial_weights: Some(
                WeightVector::uniform(target, s).expect("positive finite target"),
            ),
            check_descent: true,
        }
    }

    fn validate<L: SmoothLoss + ?Sized>(&self, loss: &L) -> Result<()> {
        let lip = loss.lipschitz();
        if !(self.mu.is_finite() && self.mu > lip) {
            return Err(Error::Config(format!(
                "mu = {} must exceed the loss Lipschitz constant {lip}",
                self.mu
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        for (name, v) in [
            ("stop_residual", self.stop_residual),
            ("stop_step", self.stop_step),
        ] {
            if let Some(v) = v {
                if v.is_nan() || v < 0.0 {
                    return Err(Error::Config(format!(
                        "{name} must be nonnegative, got {v}"
                    )));
                }
            }
        }
        self.schedule.validate()
    }
}

/// Which stopping rule ended a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Residual,
    Step,
    MaxIters,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Residual => "residual",
            Termination::Step => "step",
            Termination::MaxIters => "max_iters",
        })
    }
}

/// Final iterate plus per-iteration traces. Entry `k` of every trace
/// describes `X^{k+1}`: the lambda used to produce it, `F_lambda(X^{k+1})`,
/// its rank and `||X^{k+1} - X^k||_F`.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub final_x: DMatrix<f64>,
    /// Singular values of `final_x`, nonincreasing.
    pub final_sigma: Vec<f64>,
    pub objective_trace: Vec<f64>,
    pub rank_trace: Vec<usize>,
    pub step_trace: Vec<f64>,
    pub lambda_trace: Vec<f64>,
    pub iterations: usize,
    pub termination: Termination,
}

impl SolveReport {
    pub fn final_rank(&self) -> usize {
        wsvt::numerical_rank(&self.final_sigma)
    }

    /// Writes the traces as `iter,lambda,objective,rank,step` (1-based iter).
    pub fn write_trace_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "iter,lambda,objective,rank,step")?;
        for k in 0..self.iterations {
            writeln!(
                writer,
                "{},{},{},{},{}",
                k + 1,
                self.lambda_trace[k],
                self.objective_trace[k],
                self.rank_trace[k],
                self.step_trace[k]
            )?;
        }
        Ok(())
    }
}

/// `F(X) = sum_i g_i(sigma_i(X)) + f(X)`.
pub fn objective<L: SmoothLoss + ?Sized>(
    loss: &L,
    penalty: &Penalty,
    x: &DMatrix<f64>,
) -> Result<f64> {
    loss.check_shape(x)?;
    let sigma = wsvt::singular_values(x)?;
    objective_from_spectrum(loss, penalty, x, &sigma)
}

fn objective_from_spectrum<L: SmoothLoss + ?Sized>(
    loss: &L,
    penalty: &Penalty,
    x: &DMatrix<f64>,
    sigma: &[f64],
) -> Result<f64> {
    Ok(penalty.spectral_value(sigma)? + loss.value(x)?)
}

/// One proximal-linearized step: `WSVT(X - grad f(X)/mu, w/mu)`.
pub fn irnn_step<L: SmoothLoss + ?Sized>(
    loss: &L,
    x: &DMatrix<f64>,
    weights: &WeightVector,
    mu: f64,
) -> Result<Thresholded> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::Config(format!("mu must be positive, got {mu}")));
    }
    let (_, grad) = loss.eval_and_gradient(x)?;
    let y = x - grad / mu;
    wsvt::wsvt_decompose(&y, &weights.scaled(1.0 / mu)?)
}

/// Runs IRNN from `x0` until a stopping rule fires.
pub fn solve<L: SmoothLoss + ?Sized>(
    loss: &L,
    penalty: &Penalty,
    config: &SolverConfig,
    x0: &DMatrix<f64>,
) -> Result<SolveReport> {
    config.validate(loss)?;
    loss.check_shape(x0)?;
    let (m, n) = loss.shape();
    let s = m.min(n);
    let lip = loss.lipschitz();
    let mut lambdas = LambdaTracker::new(config.schedule, penalty.lambda());

    let mut x = x0.clone();
    let mut sigma = wsvt::singular_values(&x)?;
    let lambda_start = lambdas.lambda();
    let mut weights = match &config.initial_weights {
        Some(w) if w.len() != s => {
            return Err(Error::Config(format!(
                "initial weights have length {}, expected {s}",
                w.len()
            )))
        }
        Some(w) => w.clone(),
        None if penalty.is_index_dependent() => penalty
            .with_lambda(lambda_start)?
            .weights_from_singular_values(&sigma)?,
        None => WeightVector::uniform(lambda_start, s)?,
    };

    let mut report = SolveReport {
        final_x: DMatrix::zeros(m, n),
        final_sigma: Vec::new(),
        objective_trace: Vec::new(),
        rank_trace: Vec::new(),
        step_trace: Vec::new(),
        lambda_trace: Vec::new(),
        iterations: 0,
        termination: Termination::MaxIters,
    };

    for k in 0..config.max_iters {
        let lambda = lambdas.lambda();
        let current = penalty.with_lambda(lambda)?;
        let next = irnn_step(loss, &x, &weights, config.mu)?;
        let step = (&next.matrix - &x).norm();
        let f_next = objective_from_spectrum(loss, &current, &next.matrix, &next.sigma)?;

        // From k >= 1 the weights are supergradients of the current penalty at X^k.
        if config.check_descent && k >= 1 {
            let f_prev = objective_from_spectrum(loss, &current, &x, &sigma)?;
            let decrease = f_prev - f_next;
            let bound = 0.5 * (config.mu - lip) * step * step;
            let slack = DESCENT_SLACK * f_prev.abs().max(1.0);
            if decrease < bound - slack {
                return Err(Error::DescentViolation {
                    iteration: k,
                    decrease,
                    bound,
                });
            }
        }

        report.lambda_trace.push(lambda);
        report.objective_trace.push(f_next);
        report.rank_trace.push(next.rank());
        report.step_trace.push(step);
        report.iterations = k + 1;

        x = next.matrix;
        sigma = next.sigma;

        if let Some(tol) = config.stop_residual {
            if loss.residual_norm(&x)? <= tol {
                report.termination = Termination::Residual;
                break;
            }
        }
        if let Some(tol) = config.stop_step {
            if step <= tol && lambdas.settled() {
                report.termination = Termination::Step;
                break;
            }
        }

        lambdas.advance(step);
        weights = penalty
            .with_lambda(lambdas.lambda())?
            .weights_from_singular_values(&sigma)?;
    }

    report.final_x = x;
    report.final_sigma = sigma;
    Ok(report)
}

/// IRNN on the truncated nuclear norm `sum_{i > r} sigma_i(X)`: weights are
/// always `0` on the leading `rank` singular values and `lambda` after.
pub fn solve_truncated<L: SmoothLoss + ?Sized>(
    loss: &L,
    rank: usize,
    config: &SolverConfig,
    x0: &DMatrix<f64>,
) -> Result<SolveReport> {
    solve(loss, &Penalty::truncated_nuclear(rank, 1.0)?, config, x0)
}
