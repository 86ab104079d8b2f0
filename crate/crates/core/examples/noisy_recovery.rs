//! Mean relative error against rank when the observed entries carry Gaussian
//! noise (sigma = 0.1). Every nonconvex surrogate is compared with the convex
//! baseline at one rank.
//!
//! cargo run --release --example noisy_recovery

use irnn::bench::{run_experiment, ExperimentSpec, Method};
use irnn::{Penalty, PenaltyKind};

fn main() -> irnn::Result<()> {
    let mut methods = vec![Method::Convex];
    for kind in PenaltyKind::SURROGATES {
        methods.push(Method::Irnn(Penalty::new(kind, 1.0)?));
    }
    println!("rank 6, 60x60, 50% observed, 3 trials");
    for method in methods {
        let result = run_experiment(&ExperimentSpec::noisy(60, 60, vec![6], 3, 99, method))?;
        let s = &result.summary[0];
        println!(
            "  {:>14}: mean error {:.3e}",
            result.method, s.mean_rel_error
        );
    }
    Ok(())
}
