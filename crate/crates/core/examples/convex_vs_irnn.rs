//! At a fixed lambda the nuclear-norm penalty makes IRNN a plain proximal
//! gradient method, so it and the accelerated convex baseline reach the
//! same objective. A nonconvex penalty at the same lambda finds a lower-rank,
//! less biased solution.
//!
//! cargo run --release --example convex_vs_irnn

use irnn::baselines::{solve_convex, ConvexConfig};
use irnn::bench::{gen_lowrank, relative_error, sample_mask};
use irnn::{solve, CompletionProblem, Penalty, SolverConfig};
use nalgebra::DMatrix;

fn main() -> irnn::Result<()> {
    let (m, n) = (30, 30);
    let truth = gen_lowrank(m, n, 3, 21)?;
    let coords = sample_mask(m, n, 0.6, 22)?;
    let problem = CompletionProblem::new(m, n, coords.iter().map(|&(i, j)| (i, j, truth[(i, j)])))?;
    let x0 = DMatrix::zeros(m, n);
    let lambda = 0.5;

    let fista = solve_convex(&problem, &ConvexConfig::fixed(lambda, 5000, 1e-10), &x0)?;
    let config = SolverConfig::fixed(20000, 1e-10);
    let irnn_nuclear = solve(&problem, &Penalty::nuclear(lambda)?, &config, &x0)?;
    let irnn_lp = solve(&problem, &Penalty::lp(lambda, 0.5)?, &config, &x0)?;

    for (name, report) in [
        ("convex (accelerated)", &fista),
        ("irnn-nuclear", &irnn_nuclear),
        ("irnn-lp", &irnn_lp),
    ] {
        println!(
            "{name:>20}: objective {:.8e}, rank {}, {} iterations, relative error {:.2e}",
            report.objective_trace.last().copied().unwrap_or(f64::NAN),
            report.final_rank(),
            report.iterations,
            relative_error(&report.final_x, &truth)?
        );
    }
    Ok(())
}
