//! The truncated nuclear norm leaves the leading `r` singular values
//! unpenalized. With `r = 0` it is the nuclear norm; with `r >= min(m, n)`
//! nothing is penalized and IRNN reduces to gradient steps on the loss.
//!
//! cargo run --release --example truncated_nuclear

use irnn::bench::{gen_lowrank, relative_error, sample_mask};
use irnn::{solve_truncated, CompletionProblem, SolverConfig};
use nalgebra::DMatrix;

fn main() -> irnn::Result<()> {
    let (m, n) = (20, 20);
    let truth = gen_lowrank(m, n, 2, 5)?;
    let coords = sample_mask(m, n, 0.7, 6)?;
    let problem = CompletionProblem::new(m, n, coords.iter().map(|&(i, j)| (i, j, truth[(i, j)])))?;

    for r in [0, 1, 2, 3] {
        let report = solve_truncated(
            &problem,
            r,
            &SolverConfig::noise_free(&problem),
            &DMatrix::zeros(m, n),
        )?;
        println!(
            "r = {r}: rank {}, relative error {:.2e}, {} iterations",
            report.final_rank(),
            relative_error(&report.final_x, &truth)?,
            report.iterations
        );
    }
    Ok(())
}
