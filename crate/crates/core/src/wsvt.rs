//! Thin SVD and the weighted singular value thresholding operator.
//!
//! For nondecreasing weights `0 <= w_1 <= ... <= w_s`, the problem
//!
//! ```text
//! min_X  sum_i w_i sigma_i(X) + 1/2 ||X - Y||_F^2
//! ```
//!
//! is solved globally by shrinking each singular value of `Y` by its own
//! weight: `X* = U diag((sigma_i - w_i)_+) V^T`. The ordering of the weights
//! keeps the shrunk values sorted, so they are exactly the singular values of
//! `X*`.

use std::ops::Deref;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::svd::{self as faer_svd, ComputeSvdVectors};
use faer::{Mat, MatRef, Par};
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::penalties::ExtendedWeight;

/// Singular values below this fraction of the largest one count as zero
/// when reporting rank.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Thin SVD `Y = U diag(sigma) V^T` with `sigma` sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// `m x s` with orthonormal columns.
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    /// `n x s` with orthonormal columns.
    pub v: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        compose(&self.u, &self.sigma, &self.v)
    }
}

/// Per-singular-value weights, nonnegative and nondecreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<ExtendedWeight>);

impl WeightVector {
    pub fn new(entries: Vec<ExtendedWeight>) -> Result<Self> {
        for (i, w) in entries.iter().enumerate() {
            if let ExtendedWeight::Finite(v) = w {
                if v.is_nan() || *v < 0.0 {
                    return Err(Error::Precondition(format!(
                        "weight {i} must be nonnegative, got {v}"
                    )));
                }
            }
        }
        if let Some(pos) = entries.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::Precondition(format!(
                "weights must be nondecreasing; w[{}]={} > w[{}]={}",
                pos,
                entries[pos],
                pos + 1,
                entries[pos + 1]
            )));
        }
        Ok(WeightVector(entries))
    }

    pub fn from_finite(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&v| ExtendedWeight::Finite(v)).collect())
    }

    pub fn uniform(value: f64, len: usize) -> Result<Self> {
        Self::new(vec![ExtendedWeight::Finite(value); len])
    }

    pub fn zeros(len: usize) -> Self {
        WeightVector(vec![ExtendedWeight::Finite(0.0); len])
    }

    pub fn infinite(len: usize) -> Self {
        WeightVector(vec![ExtendedWeight::Infinite; len])
    }

    /// Multiplies every weight by `factor > 0`; ordering is preserved.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::Parameter(format!(
                "weight scale must be positive and finite, got {factor}"
            )));
        }
        Ok(WeightVector(
            self.0.iter().map(|w| w.scale(factor)).collect(),
        ))
    }

    pub fn into_inner(self) -> Vec<ExtendedWeight> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [ExtendedWeight];

    fn deref(&self) -> &[ExtendedWeight] {
        &self.0
    }
}

/// Output of [`wsvt_decompose`]: the thresholded matrix and its spectrum.
#[derive(Debug, Clone)]
pub struct Thresholded {
    pub matrix: DMatrix<f64>,
    /// Singular values of `matrix`, nonincreasing, length `min(m, n)`.
    pub sigma: Vec<f64>,
}

impl Thresholded {
    pub fn rank(&self) -> usize {
        numerical_rank(&self.sigma)
    }
}

/// Thin SVD with a stable descending order of singular values.
pub fn svd(y: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let (m, n) = y.shape();
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("matrix has non-finite entry {bad}")));
    }
    let s = m.min(n);
    if s == 0 {
        return Ok(SpectralDecomposition {
            u: DMatrix::zeros(m, 0),
            sigma: Vec::new(),
            v: DMatrix::zeros(n, 0),
        });
    }
    let raw = faer_decompose(y, true)?;
    let (u, v) = (raw.u, raw.v);

    let mut order: Vec<usize> = (0..s).collect();
    // stable: ties keep their original relative order
    order.sort_by(|&a, &b| raw.sigma[b].total_cmp(&raw.sigma[a]));

    let mut u_sorted = DMatrix::zeros(m, s);
    let mut v_sorted = DMatrix::zeros(n, s);
    let mut sigma = Vec::with_capacity(s);
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..m {
            u_sorted[(i, dst)] = u[(i, src)];
        }
        for j in 0..n {
            v_sorted[(j, dst)] = v[(j, src)];
        }
        sigma.push(raw.sigma[src].max(0.0));
    }
    Ok(SpectralDecomposition {
        u: u_sorted,
        sigma,
        v: v_sorted,
    })
}

struct RawSvd {
    u: Mat<f64>,
    sigma: Vec<f64>,
    v: Mat<f64>,
}

// Sequential thin SVD; results do not depend on the thread pool.
fn faer_decompose(y: &DMatrix<f64>, vectors: bool) -> Result<RawSvd> {
    let (m, n) = y.shape();
    let s = m.min(n);
    let a = MatRef::from_column_major_slice(y.as_slice(), m, n);
    let compute = if vectors {
        ComputeSvdVectors::Thin
    } else {
        ComputeSvdVectors::No
    };
    let mut sigma = faer::diag::Diag::<f64>::zeros(s);
    let mut u = Mat::<f64>::zeros(if vectors { m } else { 0 }, if vectors { s } else { 0 });
    let mut v = Mat::<f64>::zeros(if vectors { n } else { 0 }, if vectors { s } else { 0 });
    let mut mem = MemBuffer::new(faer_svd::svd_scratch::<f64>(
        m,
        n,
        compute,
        compute,
        Par::Seq,
        Default::default(),
    ));
    faer_svd::svd(
        a,
        sigma.as_mut(),
        vectors.then(|| u.as_mut()),
        vectors.then(|| v.as_mut()),
        Par::Seq,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|e| Error::Numerical(format!("SVD of {m}x{n} matrix failed: {e:?}")))?;
    Ok(RawSvd {
        u,
        sigma: (0..s).map(|i| sigma[i]).collect(),
        v,
    })
}

/// Singular values only, nonincreasing.
pub fn singular_values(y: &DMatrix<f64>) -> Result<Vec<f64>> {
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("matrix has non-finite entry {bad}")));
    }
    if y.nrows().min(y.ncols()) == 0 {
        return Ok(Vec::new());
    }
    let mut sv: Vec<f64> = faer_decompose(y, false)?
        .sigma
        .into_iter()
        .map(|s| s.max(0.0))
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Weighted singular value thresholding, returning the matrix and its spectrum.
pub fn wsvt_decompose(y: &DMatrix<f64>, w: &WeightVector) -> Result<Thresholded> {
    let s = y.nrows().min(y.ncols());
    if w.len() != s {
        return Err(Error::Precondition(format!(
            "weight vector has length {}, expected min(m, n) = {s}",
            w.len()
        )));
    }
    let dec = svd(y)?;
    let sigma: Vec<f64> = dec
        .sigma
        .iter()
        .zip(w.iter())
        .map(|(&s, &w)| match w {
            ExtendedWeight::Finite(w) => (s - w).max(0.0),
            ExtendedWeight::Infinite => 0.0,
        })
        .collect();
    let matrix = compose(&dec.u, &sigma, &dec.v);
    Ok(Thresholded { matrix, sigma })
}

/// `U diag((sigma_i - w_i)_+) V^T`; infinite weights annihilate exactly.
pub fn wsvt_apply(y: &DMatrix<f64>, w: &WeightVector) -> Result<DMatrix<f64>> {
    wsvt_decompose(y, w).map(|t| t.matrix)
}

/// Plain singular value thresholding at a uniform level `tau >= 0`.
pub fn svt(y: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    let s = y.nrows().min(y.ncols());
    wsvt_apply(y, &WeightVector::uniform(tau, s)?)
}

/// `sum_i w_i sigma_i(X)` with `inf * 0 = 0`.
pub fn weighted_nuclear_norm(x: &DMatrix<f64>, w: &WeightVector) -> Result<f64> {
    let s = x.nrows().min(x.ncols());
    if w.len() != s {
        return Err(Error::Precondition(format!(
            "weight vector has length {}, expected min(m, n) = {s}",
            w.len()
        )));
    }
    let sigma = singular_values(x)?;
    Ok(weighted_sum(&sigma, w))
}

pub(crate) fn weighted_sum(sigma: &[f64], w: &[ExtendedWeight]) -> f64 {
    sigma.iter().zip(w).map(|(&s, w)| w.times(s)).sum()
}

/// Count of singular values that are nonzero and above
/// `RANK_TOLERANCE * sigma_1`.
pub fn numerical_rank(sigma: &[f64]) -> usize {
    let top = sigma.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    let cutoff = RANK_TOLERANCE * top;
    sigma.iter().filter(|&&s| s > cutoff).count()
}

fn compose(u: &DMatrix<f64>, sigma: &[f64], v: &DMatrix<f64>) -> DMatrix<f64> {
    let k = sigma.iter().take_while(|&&s| s > 0.0).count();
    if k == 0 {
        return DMatrix::zeros(u.nrows(), v.nrows());
    }
    let mut us = u.columns(0, k).into_owned();
    for (j, &s) in sigma.iter().take(k).enumerate() {
        us.column_mut(j).scale_mut(s);
    }
    us * v.columns(0, k).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(values))
    }

    #[test]
    fn svd_of_diagonal() {
        let dec = svd(&diag(&[3.0, 1.0])).unwrap();
        assert_eq!(dec.sigma, vec![3.0, 1.0]);
        let id = DMatrix::<f64>::identity(2, 2);
        assert_relative_eq!(dec.u.abs(), id, epsilon = 1e-14);
        assert_relative_eq!(dec.v.abs(), id, epsilon = 1e-14);
    }

    #[test]
    fn svd_of_zero() {
        let dec = svd(&DMatrix::zeros(3, 4)).unwrap();
        assert_eq!(dec.sigma, vec![0.0; 3]);
    }

    #[test]
    fn svd_reconstructs_random_rectangular() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (m, n) in [(5, 7), (7, 5)] {
            let y = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let dec = svd(&y).unwrap();
            assert!((dec.reconstruct() - &y).norm() < 1e-10);
            let s = m.min(n);
            let eye = DMatrix::<f64>::identity(s, s);
            assert!((dec.u.transpose() * &dec.u - &eye).norm() < 1e-8);
            assert!((dec.v.transpose() * &dec.v - &eye).norm() < 1e-8);
            assert!(dec.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn svd_rejects_non_finite() {
        let mut y = DMatrix::zeros(2, 2);
        y[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&y), Err(Error::Domain(_))));
    }

    #[test]
    fn thresholding_by_hand() {
        let y = diag(&[3.0, 1.0]);
        let same = wsvt_apply(&y, &WeightVector::zeros(2)).unwrap();
        assert_relative_eq!(same, y, epsilon = 1e-14);

        let out = wsvt_apply(&y, &WeightVector::from_finite(&[1.0, 1.0]).unwrap()).unwrap();
        assert_relative_eq!(out, diag(&[2.0, 0.0]), epsilon = 1e-14);

        let out = wsvt_apply(&y, &WeightVector::from_finite(&[0.5, 2.0]).unwrap()).unwrap();
        assert_relative_eq!(out, diag(&[2.5, 0.0]), epsilon = 1e-14);
    }

    #[test]
    fn infinite_weights_give_exact_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y = DMatrix::from_fn(4, 6, |_, _| rng.random_range(-5.0..5.0));
        let out = wsvt_decompose(&y, &WeightVector::infinite(4)).unwrap();
        assert!(out.matrix.iter().all(|&v| v == 0.0));
        assert_eq!(out.rank(), 0);
    }

    #[test]
    fn weight_validation() {
        assert!(WeightVector::from_finite(&[2.0, 1.0]).is_err());
        assert!(WeightVector::from_finite(&[-1.0, 1.0]).is_err());
        assert!(
            WeightVector::new(vec![ExtendedWeight::Infinite, ExtendedWeight::Finite(1.0)]).is_err()
        );
        let y = diag(&[1.0, 2.0]);
        assert!(matches!(
            wsvt_apply(&y, &WeightVector::zeros(3)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn weighted_norm_values() {
        let w = WeightVector::from_finite(&[1.0, 3.0]).unwrap();
        assert_eq!(
            weighted_nuclear_norm(&DMatrix::zeros(2, 2), &w).unwrap(),
            0.0
        );
        assert_relative_eq!(
            weighted_nuclear_norm(&diag(&[2.0, 1.0]), &w).unwrap(),
            5.0,
            epsilon = 1e-14
        );
        let w =
            WeightVector::new(vec![ExtendedWeight::Finite(1.0), ExtendedWeight::Infinite]).unwrap();
        assert_relative_eq!(
            weighted_nuclear_norm(&diag(&[2.0, 0.0]), &w).unwrap(),
            2.0,
            epsilon = 1e-14
        );
        assert!(weighted_nuclear_norm(&diag(&[2.0]), &w).is_err());
    }

    #[test]
    fn rank_snapping() {
        assert_eq!(numerical_rank(&[1.0, 1e-13, 0.0]), 1);
        assert_eq!(numerical_rank(&[1.0, 1e-11, 0.0]), 2);
        assert_eq!(numerical_rank(&[0.0, 0.0]), 0);
        assert_eq!(numerical_rank(&[]), 0);
    }
}
