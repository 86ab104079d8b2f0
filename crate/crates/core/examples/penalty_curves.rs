//! Prints g(theta) and its supergradient for every surrogate penalty on a
//! coarse grid, then the IRNN weights each one assigns to a fixed spectrum.
//!
//! cargo run --example penalty_curves

use irnn::{Penalty, PenaltyKind};

fn main() -> irnn::Result<()> {
    let grid = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];
    println!("{:>10} {:>6} {:>10} {:>10}", "kind", "theta", "g", "dg");
    for kind in PenaltyKind::SURROGATES {
        let penalty = Penalty::new(kind, 1.0)?;
        for theta in grid {
            println!(
                "{:>10} {:>6.2} {:>10.4} {:>10.4}",
                kind.name(),
                theta,
                penalty.value(theta)?,
                penalty.supergradient(theta)?.to_f64()
            );
        }
    }

    // Small singular values get large weights and are thresholded harder.
    let sigma = [9.0, 4.0, 1.0, 0.2, 0.0];
    println!("\nweights for sigma = {sigma:?}");
    for kind in PenaltyKind::ALL {
        let penalty = match kind {
            PenaltyKind::TruncatedNuclear => Penalty::truncated_nuclear(2, 1.0)?,
            _ => Penalty::new(kind, 1.0)?,
        };
        let w = penalty.weights_from_singular_values(&sigma)?;
        let shown: Vec<String> = w.iter().map(|x| format!("{:.3}", x.to_f64())).collect();
        println!("{:>10}: [{}]", kind.name(), shown.join(", "));
    }
    Ok(())
}
