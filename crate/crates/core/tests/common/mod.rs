//! Oracles shared by the integration tests and the acceptance runner. None of
//! them call the thresholding or solver code they are used to check.

#![allow(dead_code)]

use irnn::wsvt::{singular_values, weighted_nuclear_norm};
use irnn::{CompletionProblem, ExtendedWeight, WeightVector};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut impl Rng, m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Nonnegative, nondecreasing weights; with `allow_inf` the tail may be `+inf`.
pub fn random_weights(rng: &mut impl Rng, len: usize, scale: f64, allow_inf: bool) -> WeightVector {
    let mut w: Vec<f64> = (0..len).map(|_| scale * rng.random::<f64>()).collect();
    w.sort_by(|a, b| a.total_cmp(b));
    let infinite = if allow_inf && rng.random_bool(0.3) {
        rng.random_range(0..=len)
    } else {
        0
    };
    let entries = w
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            if i >= len - infinite {
                ExtendedWeight::Infinite
            } else {
                ExtendedWeight::Finite(v)
            }
        })
        .collect();
    WeightVector::new(entries).unwrap()
}

/// `sum_i w_i sigma_i(X) + 1/2 ||X - Y||_F^2`.
pub fn prox_objective(x: &DMatrix<f64>, y: &DMatrix<f64>, w: &WeightVector) -> f64 {
    weighted_nuclear_norm(x, w).unwrap() + 0.5 * (x - y).norm_squared()
}

/// Checks that no random perturbation of `x` (magnitudes 1e-3 to 1) lowers
/// the proximal objective by more than `slack`.
pub fn beats_perturbations(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w: &WeightVector,
    trials: usize,
    slack: f64,
    rng: &mut impl Rng,
) -> Result<(), String> {
    let best = prox_objective(x, y, w);
    for t in 0..trials {
        let scale = 10f64.powf(-3.0 * rng.random::<f64>());
        let mut d = gaussian(rng, x.nrows(), x.ncols());
        d *= scale / d.norm();
        let other = prox_objective(&(x + &d), y, w);
        if other < best - slack {
            return Err(format!(
                "perturbation {t} (size {scale:.1e}) lowers objective {best} to {other}"
            ));
        }
    }
    Ok(())
}

/// Minimizes `w s + 1/2 (s - y)^2` over `s in [0, y]` on a grid of spacing
/// `h`. `+inf` weights only admit `s = 0`.
pub fn scalar_grid_minimizer(y: f64, w: ExtendedWeight, h: f64) -> f64 {
    let Some(w) = w.finite() else { return 0.0 };
    let steps = (y / h).ceil() as usize;
    let mut best = (0.0, 0.5 * y * y);
    for i in 1..=steps {
        let s = (i as f64 * h).min(y);
        let f = w * s + 0.5 * (s - y) * (s - y);
        if f < best.1 {
            best = (s, f);
        }
    }
    best.0
}

/// Compares every singular value of `x` with the grid minimizer built from
/// the matching singular value of `y`.
pub fn matches_grid_oracle(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    w: &WeightVector,
    h: f64,
) -> Result<(), String> {
    let sx = singular_values(x).unwrap();
    let sy = singular_values(y).unwrap();
    for (i, ((&a, &b), &wi)) in sx.iter().zip(&sy).zip(w.iter()).enumerate() {
        let oracle = scalar_grid_minimizer(b, wi, h);
        if (a - oracle).abs() > h + 1e-9 {
            return Err(format!(
                "sigma_{i}: {a} vs grid {oracle} (y = {b}, w = {wi})"
            ));
        }
    }
    Ok(())
}

/// Random `m x n` matrix of exact rank `r` with unit-variance entries.
pub fn low_rank(rng: &mut impl Rng, m: usize, n: usize, r: usize) -> DMatrix<f64> {
    gaussian(rng, m, r) * gaussian(rng, r, n) / (r as f64).sqrt()
}

pub fn completion(rng: &mut impl Rng, truth: &DMatrix<f64>, fraction: f64) -> CompletionProblem {
    let (m, n) = truth.shape();
    loop {
        let keep: Vec<bool> = (0..m * n).map(|_| rng.random_bool(fraction)).collect();
        if let Ok(p) = CompletionProblem::from_dense(truth, |i, j| keep[i * n + j]) {
            return p;
        }
    }
}

/// One textbook proximal gradient step on `lambda ||X||_* + 1/2 ||P(X - M)||^2`
/// with step `1/mu`, using its own SVD.
pub fn textbook_prox_step(
    x: &DMatrix<f64>,
    problem: &CompletionProblem,
    lambda: f64,
    mu: f64,
) -> DMatrix<f64> {
    let mut y = x.clone();
    for (i, j, v) in problem.entries() {
        y[(i, j)] -= (x[(i, j)] - v) / mu;
    }
    let svd = y.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let shrunk = svd.singular_values.map(|s| (s - lambda / mu).max(0.0));
    u * DMatrix::from_diagonal(&shrunk) * vt
}

pub fn relative_error(x: &DMatrix<f64>, truth: &DMatrix<f64>) -> f64 {
    (x - truth).norm() / truth.norm()
}
