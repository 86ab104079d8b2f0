//! Convex nuclear-norm baseline: accelerated proximal gradient on
//! `lambda ||X||_* + f(X)` with fixed step `1 / L(f)` and optional lambda
//! continuation. No line search.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::losses::{CompletionProblem, SmoothLoss};
use crate::solver::{
    LambdaSchedule, LambdaTracker, SolveReport, Termination, STAGE_ITERS, STAGE_STEP,
};
use crate::wsvt::{self, WeightVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexConfig {
    /// Regularization strength, used directly when `schedule` is `Fixed`.
    pub lambda: f64,
    pub schedule: LambdaSchedule,
    pub max_iters: usize,
    /// Stop once `||X^{k+1} - X^k||_F <= stop_step` with lambda settled.
    pub stop_step: Option<f64>,
    pub stop_residual: Option<f64>,
    /// Nesterov momentum on or off.
    pub acceleration: bool,
}

impl ConvexConfig {
    pub fn fixed(lambda: f64, max_iters: usize, stop_step: f64) -> Self {
        ConvexConfig {
            lambda,
            schedule: LambdaSchedule::Fixed,
            max_iters,
            stop_step: Some(stop_step),
            stop_residual: None,
            acceleration: true,
        }
    }

    /// Same continuation and stopping as [`crate::solver::SolverConfig::noise_free`].
    pub fn noise_free(problem: &CompletionProblem) -> Self {
        let lambda0 = problem.observed_max_abs().max(f64::MIN_POSITIVE);
        let target = 1e-5 * lambda0;
        ConvexConfig {
            lambda: target,
            schedule: LambdaSchedule::Staged {
                lambda0,
                eta: 0.7,
                target,
                stage_step: STAGE_STEP * problem.observed_norm(),
                stage_iters: STAGE_ITERS,
            },
            max_iters: 2000,
            stop_step: Some(1e-7 * problem.observed_norm()),
            stop_residual: Some(1e-5),
            acceleration: true,
        }
    }

    /// Same continuation and stopping as [`crate::solver::SolverConfig::noisy`].
    pub fn noisy(problem: &CompletionProblem) -> Self {
        let lambda0 = 10.0 * problem.observed_max_abs().max(f64::MIN_POSITIVE);
        let target = 0.1 * lambda0;
        ConvexConfig {
            lambda: target,
            schedule: LambdaSchedule::Continuation {
                lambda0,
                eta: 0.7,
                target,
            },
            max_iters: 500,
            stop_step: Some(1e-5 * problem.observed_norm()),
            stop_residual: None,
            acceleration: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Config(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        self.schedule.validate()
    }
}

/// Minimizes `lambda ||X||_* + f(X)` from `x0`.
///
/// Traces follow the [`SolveReport`] convention; the objective is evaluated
/// with the lambda of the iteration that produced each iterate.
pub fn solve_convex<L: SmoothLoss + ?Sized>(
    loss: &L,
    config: &ConvexConfig,
    x0: &DMatrix<f64>,
) -> Result<SolveReport> {
    config.validate()?;
    loss.check_shape(x0)?;
    let lip = loss.lipschitz();
    let (m, n) = loss.shape();
    let s = m.min(n);
    let mut lambdas = LambdaTracker::new(config.schedule, config.lambda);

    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut t = 1.0f64;
    let mut sigma = wsvt::singular_values(&x)?;

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
        let (_, grad) = loss.eval_and_gradient(&y)?;
        let z = &y - grad / lip;
        let next = wsvt::wsvt_decompose(&z, &WeightVector::uniform(lambda / lip, s)?)?;
        let step = (&next.matrix - &x).norm();
        let objective = lambda * next.sigma.iter().sum::<f64>() + loss.value(&next.matrix)?;

        if config.acceleration {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            y = &next.matrix + (&next.matrix - &x) * beta;
            t = t_next;
        } else {
            y = next.matrix.clone();
        }

        report.lambda_trace.push(lambda);
        report.objective_trace.push(objective);
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
        // Momentum restarts with each new continuation stage.
        if lambdas.advance(step) && config.acceleration {
            y = x.clone();
            t = 1.0;
        }
    }

    report.final_x = x;
    report.final_sigma = sigma;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(m: usize, n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(m, n, |_, _| -> f64 { StandardNormal.sample(&mut rng) })
    }

    #[test]
    fn fully_observed_matches_closed_form_prox() {
        let m = random(6, 5, 1);
        let p = CompletionProblem::fully_observed(&m).unwrap();
        let sigma = wsvt::singular_values(&m).unwrap();
        let lambda = 0.1 * sigma[4];
        for acceleration in [true, false] {
            let mut cfg = ConvexConfig::fixed(lambda, 500, 1e-12);
            cfg.acceleration = acceleration;
            let rep = solve_convex(&p, &cfg, &DMatrix::zeros(6, 5)).unwrap();
            let expected = wsvt::svt(&m, lambda).unwrap();
            assert!((rep.final_x - expected).norm() < 1e-6);
        }
    }

    #[test]
    fn threshold_above_top_singular_value_gives_zero() {
        let m = random(4, 4, 2);
        let p = CompletionProblem::fully_observed(&m).unwrap();
        let sigma1 = wsvt::singular_values(&m).unwrap()[0];
        let rep = solve_convex(
            &p,
            &ConvexConfig::fixed(sigma1, 50, 1e-12),
            &DMatrix::zeros(4, 4),
        )
        .unwrap();
        assert!(rep.final_x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unaccelerated_descent_is_monotone() {
        let m = random(8, 8, 3);
        let p = CompletionProblem::from_dense(&m, |r, c| (r + 2 * c) % 3 != 0).unwrap();
        let mut cfg = ConvexConfig::fixed(0.5, 200, 0.0);
        cfg.acceleration = false;
        let rep = solve_convex(&p, &cfg, &DMatrix::zeros(8, 8)).unwrap();
        for w in rep.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn rejects_bad_config() {
        let p = CompletionProblem::fully_observed(&random(2, 2, 4)).unwrap();
        assert!(solve_convex(
            &p,
            &ConvexConfig::fixed(0.0, 10, 0.0),
            &DMatrix::zeros(2, 2)
        )
        .is_err());
        assert!(
            solve_convex(&p, &ConvexConfig::fixed(1.0, 0, 0.0), &DMatrix::zeros(2, 2)).is_err()
        );
    }
}
