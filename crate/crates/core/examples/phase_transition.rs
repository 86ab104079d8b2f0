//! Success frequency against rank for IRNN-Lp and the convex baseline on
//! noise-free 60x60 problems with half the entries observed.
//!
//! cargo run --release --example phase_transition [trials]

use irnn::bench::{run_experiment, ExperimentSpec, Method};
use irnn::Penalty;

fn main() -> irnn::Result<()> {
    let trials: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let ranks = vec![4, 8, 12, 16];
    for method in [Method::Irnn(Penalty::lp(1.0, 0.5)?), Method::Convex] {
        let result = run_experiment(&ExperimentSpec::phase(
            60,
            60,
            ranks.clone(),
            trials,
            2024,
            method,
        ))?;
        println!("{}", result.method);
        for s in &result.summary {
            println!(
                "  rank {:>2}: success {:>4.2}  mean error {:.2e}  mean iterations {:.0}",
                s.rank, s.success_frequency, s.mean_rel_error, s.mean_iterations
            );
        }
    }
    Ok(())
}
