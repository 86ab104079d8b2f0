//! Synthetic matrix-completion experiments.
//!
//! Two protocols are supported. `NoiseFree` draws `M = M_L M_R` with
//! Gaussian factors, hides a uniformly random subset of entries and counts a
//! trial as a success when the relative error `||X - M||_F / ||M||_F` falls
//! below a threshold (1e-3 by default). `Noisy` adds Gaussian noise to the
//! observed entries and reports mean relative error per rank.
//!
//! Every trial draws its data from a seed derived from
//! `(spec.seed, rank, trial)`, so results do not depend on scheduling and two
//! methods run with the same spec see identical problems.

use std::io::Write;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::baselines::{solve_convex, ConvexConfig};
use crate::error::{Error, Result};
use crate::losses::CompletionProblem;
use crate::penalties::Penalty;
use crate::solver::{solve, SolveReport, SolverConfig};

pub const SUCCESS_THRESHOLD: f64 = 1e-3;

/// Recovery method under test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// IRNN with the given penalty; its lambda is replaced by the protocol's
    /// continuation schedule.
    Irnn(Penalty),
    /// Accelerated proximal gradient on the nuclear norm.
    Convex,
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Irnn(p) => format!("irnn-{}", p.kind()),
            Method::Convex => "convex".to_string(),
        }
    }

    /// Solves a completion problem under the given protocol's defaults.
    pub fn solve(
        &self,
        problem: &CompletionProblem,
        protocol: Protocol,
        max_iters: Option<usize>,
    ) -> Result<SolveReport> {
        let x0 = DMatrix::zeros(problem.nrows(), problem.ncols());
        match self {
            Method::Irnn(penalty) => {
                let mut cfg = match protocol {
                    Protocol::NoiseFree => SolverConfig::noise_free(problem),
                    Protocol::Noisy => SolverConfig::noisy(problem),
                };
                if let Some(it) = max_iters {
                    cfg.max_iters = it;
                }
                solve(problem, penalty, &cfg, &x0)
            }
            Method::Convex => {
                let mut cfg = match protocol {
                    Protocol::NoiseFree => ConvexConfig::noise_free(problem),
                    Protocol::Noisy => ConvexConfig::noisy(problem),
                };
                if let Some(it) = max_iters {
                    cfg.max_iters = it;
                }
                solve_convex(problem, &cfg, &x0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    NoiseFree,
    Noisy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub m: usize,
    pub n: usize,
    pub rank_grid: Vec<usize>,
    pub trials: usize,
    pub observe_fraction: f64,
    pub noise_sigma: f64,
    pub method: Method,
    pub protocol: Protocol,
    pub seed: u64,
    pub success_threshold: f64,
    /// Overrides the protocol's iteration cap.
    pub max_iters: Option<usize>,
}

impl ExperimentSpec {
    /// Noise-free phase-transition protocol with half the entries observed.
    pub fn phase(
        m: usize,
        n: usize,
        rank_grid: Vec<usize>,
        trials: usize,
        seed: u64,
        method: Method,
    ) -> Self {
        ExperimentSpec {
            m,
            n,
            rank_grid,
            trials,
            observe_fraction: 0.5,
            noise_sigma: 0.0,
            method,
            protocol: Protocol::NoiseFree,
            seed,
            success_threshold: SUCCESS_THRESHOLD,
            max_iters: None,
        }
    }

    /// Noisy protocol: half observed, noise level 0.1.
    pub fn noisy(
        m: usize,
        n: usize,
        rank_grid: Vec<usize>,
        trials: usize,
        seed: u64,
        method: Method,
    ) -> Self {
        ExperimentSpec {
            noise_sigma: 0.1,
            protocol: Protocol::Noisy,
            ..Self::phase(m, n, rank_grid, trials, seed, method)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.m.min(self.n);
        if s == 0 {
            return Err(Error::Config("matrix dimensions must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if let Some(&r) = self.rank_grid.iter().find(|&&r| r > s) {
            return Err(Error::Config(format!("rank {r} exceeds min(m, n) = {s}")));
        }
        if !(self.observe_fraction > 0.0 && self.observe_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "observe fraction must lie in (0, 1], got {}",
                self.observe_fraction
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config(format!(
                "noise sigma must be nonnegative, got {}",
                self.noise_sigma
            )));
        }
        if self.success_threshold.is_nan() || self.success_threshold <= 0.0 {
            return Err(Error::Config("success threshold must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub rank: usize,
    pub trial: usize,
    /// NaN when the solver failed.
    pub rel_error: f64,
    pub success: bool,
    pub iterations: usize,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankSummary {
    pub rank: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_frequency: f64,
    /// Mean over trials that did not fail.
    pub mean_rel_error: f64,
    pub mean_iterations: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub method: String,
    /// Sorted by `(rank grid position, trial)`.
    pub trials: Vec<TrialResult>,
    pub summary: Vec<RankSummary>,
}

impl ExperimentResult {
    pub fn summary_for(&self, rank: usize) -> Option<&RankSummary> {
        self.summary.iter().find(|s| s.rank == rank)
    }

    /// Largest rank whose success frequency reaches `level`.
    pub fn largest_rank_with_success(&self, level: f64) -> Option<usize> {
        self.summary
            .iter()
            .filter(|s| s.success_frequency >= level)
            .map(|s| s.rank)
            .max()
    }

    /// Per-trial CSV `rank,trial,rel_error,success,iters,seconds`. The
    /// `seconds` field is left empty unless `timing` is set, which keeps
    /// repeated runs byte-identical.
    pub fn write_trials_csv<W: Write>(&self, mut w: W, timing: bool) -> Result<()> {
        writeln!(w, "rank,trial,rel_error,success,iters,seconds")?;
        for t in &self.trials {
            let seconds = if timing {
                format!("{:.6}", t.seconds)
            } else {
                String::new()
            };
            writeln!(
                w,
                "{},{},{:e},{},{},{}",
                t.rank,
                t.trial,
                t.rel_error,
                u8::from(t.success),
                t.iterations,
                seconds
            )?;
        }
        Ok(())
    }

    /// Aggregate CSV `rank,trials,success_freq,mean_rel_error,mean_iters`.
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "rank,trials,success_freq,mean_rel_error,mean_iters")?;
        for s in &self.summary {
            writeln!(
                w,
                "{},{},{},{:e},{}",
                s.rank, s.trials, s.success_frequency, s.mean_rel_error, s.mean_iterations
            )?;
        }
        Ok(())
    }
}

/// `M_L M_R` with i.i.d. standard normal `m x r` and `r x n` factors.
pub fn gen_lowrank(m: usize, n: usize, rank: usize, seed: u64) -> Result<DMatrix<f64>> {
    if rank > m.min(n) {
        return Err(Error::Precondition(format!(
            "rank {rank} exceeds min({m}, {n})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left = DMatrix::from_fn(m, rank, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let right = DMatrix::from_fn(rank, n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    Ok(left * right)
}

/// Exactly `round(fraction * m * n)` distinct positions, uniformly at random,
/// sorted by `(row, col)`.
pub fn sample_mask(m: usize, n: usize, fraction: f64, seed: u64) -> Result<Vec<(usize, usize)>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Precondition(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let total = m * n;
    let count = ((fraction * total as f64).round() as usize).min(total);
    if count == 0 {
        return Err(Error::Precondition(format!(
            "fraction {fraction} of {m}x{n} selects no entries"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, total, count).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| (i / n, i % n)).collect())
}

/// Adds `sigma * N(0, 1)` to every value.
pub fn add_noise(values: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return values.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    values
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sigma * z
        })
        .collect()
}

/// `||x_hat - m||_F / ||m||_F`.
pub fn relative_error(x_hat: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64> {
    if x_hat.shape() != m.shape() {
        return Err(Error::Precondition("shape mismatch".into()));
    }
    let denom = m.norm();
    if denom == 0.0 {
        return Err(Error::Domain("relative error against a zero matrix".into()));
    }
    Ok((x_hat - m).norm() / denom)
}

/// Seed for one `(rank, trial)` cell.
pub fn trial_seed(seed: u64, rank: usize, trial: usize) -> u64 {
    let mut h = splitmix(seed);
    h = splitmix(h ^ rank as u64);
    splitmix(h ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ground truth and observations for one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub truth: DMatrix<f64>,
    pub problem: CompletionProblem,
}

pub fn trial_data(spec: &ExperimentSpec, rank: usize, trial: usize) -> Result<TrialData> {
    let base = trial_seed(spec.seed, rank, trial);
    let truth = gen_lowrank(spec.m, spec.n, rank, splitmix(base ^ 1))?;
    let coords = sample_mask(spec.m, spec.n, spec.observe_fraction, splitmix(base ^ 2))?;
    let clean: Vec<f64> = coords.iter().map(|&(r, c)| truth[(r, c)]).collect();
    let values = add_noise(&clean, spec.noise_sigma, splitmix(base ^ 3));
    let problem = CompletionProblem::new(
        spec.m,
        spec.n,
        coords.iter().zip(values).map(|(&(r, c), v)| (r, c, v)),
    )?;
    Ok(TrialData { truth, problem })
}

fn run_trial(spec: &ExperimentSpec, rank: usize, trial: usize) -> TrialResult {
    let start = Instant::now();
    let outcome = trial_data(spec, rank, trial).and_then(|data| {
        let report = spec
            .method
            .solve(&data.problem, spec.protocol, spec.max_iters)?;
        let err = if data.truth.norm() == 0.0 {
            // zero ground truth: report the absolute error instead
            report.final_x.norm()
        } else {
            relative_error(&report.final_x, &data.truth)?
        };
        Ok((err, report.iterations))
    });
    let seconds = start.elapsed().as_secs_f64();
    match outcome {
        Ok((rel_error, iterations)) => TrialResult {
            rank,
            trial,
            rel_error,
            success: rel_error < spec.success_threshold,
            iterations,
            seconds,
            error: None,
        },
        Err(e) => TrialResult {
            rank,
            trial,
            rel_error: f64::NAN,
            success: false,
            iterations: 0,
            seconds,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every `(rank, trial)` cell in parallel and aggregates per rank.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let cells: Vec<(usize, usize)> = spec
        .rank_grid
        .iter()
        .flat_map(|&r| (0..spec.trials).map(move |t| (r, t)))
        .collect();
    let trials: Vec<TrialResult> = cells
        .par_iter()
        .map(|&(rank, trial)| run_trial(spec, rank, trial))
        .collect();

    let summary = spec
        .rank_grid
        .iter()
        .enumerate()
        .map(|(pos, &rank)| {
            let rows = &trials[pos * spec.trials..(pos + 1) * spec.trials];
            let successes = rows.iter().filter(|t| t.success).count();
            let ok: Vec<&TrialResult> = rows.iter().filter(|t| t.error.is_none()).collect();
            let mean_rel_error = if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|t| t.rel_error).sum::<f64>() / ok.len() as f64
            };
            RankSummary {
                rank,
                trials: rows.len(),
                successes,
                success_frequency: successes as f64 / rows.len() as f64,
                mean_rel_error,
                mean_iterations: rows.iter().map(|t| t.iterations as f64).sum::<f64>()
                    / rows.len() as f64,
            }
        })
        .collect();

    Ok(ExperimentResult {
        method: spec.method.name(),
        trials,
        summary,
    })
}
