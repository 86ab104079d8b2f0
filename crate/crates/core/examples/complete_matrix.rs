//! Completes a 60x60 rank-5 matrix from half of its entries with IRNN-Lp and
//! prints the convergence trace.
//!
//! cargo run --release --example complete_matrix

use irnn::bench::{gen_lowrank, relative_error, sample_mask};
use irnn::{solve, CompletionProblem, Penalty, SolverConfig};
use nalgebra::DMatrix;

fn main() -> irnn::Result<()> {
    let (m, n, r) = (60, 60, 5);
    let truth = gen_lowrank(m, n, r, 11)?;
    let coords = sample_mask(m, n, 0.5, 12)?;
    let problem = CompletionProblem::new(m, n, coords.iter().map(|&(i, j)| (i, j, truth[(i, j)])))?;

    let penalty = Penalty::lp(1.0, 0.5)?;
    let config = SolverConfig::noise_free(&problem);
    let report = solve(&problem, &penalty, &config, &DMatrix::zeros(m, n))?;

    println!(
        "{:>6} {:>12} {:>14} {:>5}",
        "iter", "lambda", "objective", "rank"
    );
    for k in (0..report.iterations)
        .step_by(50)
        .chain([report.iterations - 1])
    {
        println!(
            "{:>6} {:>12.4e} {:>14.6e} {:>5}",
            k + 1,
            report.lambda_trace[k],
            report.objective_trace[k],
            report.rank_trace[k]
        );
    }
    println!(
        "stopped after {} iterations ({}); rank {}, relative error {:.2e}",
        report.iterations,
        report.termination,
        report.final_rank(),
        relative_error(&report.final_x, &truth)?
    );
    Ok(())
}
