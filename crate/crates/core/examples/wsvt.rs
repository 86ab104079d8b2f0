//! Weighted singular value thresholding with nondecreasing weights: the
//! closed-form minimizer of `sum_i w_i sigma_i(X) + 1/2 ||X - Y||_F^2`.
//!
//! cargo run --example wsvt

use irnn::wsvt::{singular_values, svt, weighted_nuclear_norm, wsvt_decompose};
use irnn::WeightVector;
use nalgebra::DMatrix;

fn objective(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &WeightVector) -> irnn::Result<f64> {
    Ok(weighted_nuclear_norm(x, w)? + 0.5 * (x - y).norm_squared())
}

fn main() -> irnn::Result<()> {
    let y = DMatrix::from_fn(6, 5, |i, j| {
        ((i * 5 + j) as f64 * 0.7).sin() + 0.1 * i as f64
    });
    println!("sigma(Y)   = {:.4?}", singular_values(&y)?);

    let w = WeightVector::from_finite(&[0.0, 0.3, 0.6, 1.0, 1.5])?;
    let t = wsvt_decompose(&y, &w)?;
    println!("sigma(X*)  = {:.4?}", t.sigma);
    println!("rank(X*)   = {}", t.rank());

    // Any perturbation of the minimizer increases the objective.
    let x = t.matrix.clone();
    let best = objective(&x, &y, &w)?;
    let nudge = DMatrix::from_fn(6, 5, |i, j| 1e-3 * ((i + 2 * j) as f64).cos());
    println!("F(X*)      = {best:.6}");
    println!("F(X* + dX) = {:.6}", objective(&(&x + nudge), &y, &w)?);

    // Uniform weights reduce to ordinary singular value thresholding.
    let u = WeightVector::uniform(0.8, 5)?;
    let diff = (wsvt_decompose(&y, &u)?.matrix - svt(&y, 0.8)?).norm();
    println!("||WSVT(uniform) - SVT|| = {diff:.2e}");
    Ok(())
}
