//! Smooth data-fit terms with Lipschitz-continuous gradients.
//!
//! [`CompletionProblem`] is the masked squared loss
//! `f(X) = 1/2 ||P_Omega(X - M)||_F^2`, whose gradient `P_Omega(X - M)` is
//! 1-Lipschitz. [`AffineLoss`] is the general `1/2 ||A(X) - b||^2` with a
//! caller-supplied bound on the spectral radius of `A* A`.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A smooth loss `f` with `L`-Lipschitz gradient.
pub trait SmoothLoss: Sync {
    /// Shape `(m, n)` of the matrix variable.
    fn shape(&self) -> (usize, usize);

    fn eval_and_gradient(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)>;

    fn value(&self, x: &DMatrix<f64>) -> Result<f64> {
        self.eval_and_gradient(x).map(|(v, _)| v)
    }

    /// An upper bound `L(f)` on the gradient's Lipschitz constant.
    fn lipschitz(&self) -> f64;

    /// Norm of the data residual, used by the residual stopping rule.
    fn residual_norm(&self, x: &DMatrix<f64>) -> Result<f64>;

    fn check_shape(&self, x: &DMatrix<f64>) -> Result<()> {
        let expected = self.shape();
        if x.shape() != expected {
            return Err(Error::Precondition(format!(
                "matrix is {}x{}, loss expects {}x{}",
                x.nrows(),
                x.ncols(),
                expected.0,
                expected.1
            )));
        }
        Ok(())
    }
}

/// Partially observed matrix: shape, sampled positions and their values.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionProblem {
    nrows: usize,
    ncols: usize,
    /// Sampled positions sorted by `(row, col)`.
    coords: Vec<(usize, usize)>,
    /// Column-major dense view of the sample set.
    mask: Vec<bool>,
    /// Observed values at sampled positions, zero elsewhere.
    observed: DMatrix<f64>,
}

impl CompletionProblem {
    /// Builds a problem from `(row, col, value)` triplets with 0-based indices.
    pub fn new<I>(nrows: usize, ncols: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut mask = vec![false; nrows * ncols];
        let mut observed = DMatrix::zeros(nrows, ncols);
        let mut coords = Vec::new();
        for (r, c, v) in entries {
            if r >= nrows || c >= ncols {
                return Err(Error::Precondition(format!(
                    "entry ({r}, {c}) out of bounds for {nrows}x{ncols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "entry ({r}, {c}) is not finite: {v}"
                )));
            }
            let idx = r + c * nrows;
            if mask[idx] {
                return Err(Error::Precondition(format!("duplicate entry ({r}, {c})")));
            }
            mask[idx] = true;
            observed[(r, c)] = v;
            coords.push((r, c));
        }
        if coords.is_empty() {
            return Err(Error::Precondition("no observed entries".into()));
        }
        coords.sort_unstable();
        Ok(CompletionProblem {
            nrows,
            ncols,
            coords,
            mask,
            observed,
        })
    }

    /// Samples `full` on the positions where `mask(row, col)` is true.
    pub fn from_dense(full: &DMatrix<f64>, mask: impl Fn(usize, usize) -> bool) -> Result<Self> {
        let (m, n) = full.shape();
        let entries = (0..m)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .filter(|&(r, c)| mask(r, c))
            .map(|(r, c)| (r, c, full[(r, c)]));
        Self::new(m, n, entries)
    }

    /// Fully observed problem: every entry of `full` is sampled.
    pub fn fully_observed(full: &DMatrix<f64>) -> Result<Self> {
        Self::from_dense(full, |_, _| true)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn num_observed(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    pub fn is_observed(&self, row: usize, col: usize) -> bool {
        row < self.nrows && col < self.ncols && self.mask[row + col * self.nrows]
    }

    /// `P_Omega(M)`: observed values with zeros elsewhere.
    pub fn observed(&self) -> &DMatrix<f64> {
        &self.observed
    }

    /// Observed `(row, col, value)` triplets in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.coords
            .iter()
            .map(move |&(r, c)| (r, c, self.observed[(r, c)]))
    }

    /// Same sample set with new observed values, in `coords()` order.
    pub fn with_values(&self, values: &[f64]) -> Result<Self> {
        if values.len() != self.coords.len() {
            return Err(Error::Precondition(format!(
                "expected {} values, got {}",
                self.coords.len(),
                values.len()
            )));
        }
        let mut next = self.clone();
        for (&(r, c), &v) in self.coords.iter().zip(values) {
            if !v.is_finite() {
                return Err(Error::Domain(format!("value at ({r}, {c}) is not finite")));
            }
            next.observed[(r, c)] = v;
        }
        Ok(next)
    }

    /// `P_Omega(X)`.
    pub fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = x.clone();
        for (v, &keep) in out.iter_mut().zip(&self.mask) {
            if !keep {
                *v = 0.0;
            }
        }
        out
    }

    /// `||P_Omega(M)||_inf`, the largest observed magnitude.
    pub fn observed_max_abs(&self) -> f64 {
        self.observed.amax()
    }

    /// `||P_Omega(M)||_F`.
    pub fn observed_norm(&self) -> f64 {
        self.observed.norm()
    }

    /// Reads the triplet CSV format: an optional `# shape m n` comment line,
    /// a `row,col,value` header, then one 0-based triplet per line. When
    /// neither the comment nor `shape` is given the shape is inferred from the
    /// largest indices.
    pub fn read_csv<R: BufRead>(mut reader: R, shape: Option<(usize, usize)>) -> Result<Self> {
        let mut header_shape = None;
        let mut body = String::new();
        let mut line = String::new();
        while reader.read_line(&mut line)? > 0 {
            let trimmed = line.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                let mut parts = comment.split_whitespace();
                if parts.next() == Some("shape") {
                    let dims: Vec<usize> = parts
                        .map(|p| {
                            p.parse()
                                .map_err(|_| Error::Config(format!("bad shape comment: {trimmed}")))
                        })
                        .collect::<Result<_>>()?;
                    if dims.len() != 2 {
                        return Err(Error::Config(format!("bad shape comment: {trimmed}")));
                    }
                    header_shape = Some((dims[0], dims[1]));
                }
            } else if !trimmed.is_empty() {
                body.push_str(&line);
            }
            line.clear();
        }

        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let mut triplets = Vec::new();
        for record in rdr.deserialize() {
            let (r, c, v): (usize, usize, f64) = record?;
            triplets.push((r, c, v));
        }
        let (m, n) = match shape.or(header_shape) {
            Some(s) => s,
            None => triplets
                .iter()
                .fold((0, 0), |(m, n), &(r, c, _)| (m.max(r + 1), n.max(c + 1))),
        };
        Self::new(m, n, triplets)
    }

    pub fn write_csv<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "# shape {} {}", self.nrows, self.ncols)?;
        writeln!(writer, "row,col,value")?;
        for (r, c, v) in self.entries() {
            writeln!(writer, "{r},{c},{v}")?;
        }
        Ok(())
    }
}

/// Writes a matrix as plain CSV, one row per line, no header.
pub fn write_dense_csv<W: Write>(mut writer: W, x: &DMatrix<f64>) -> Result<()> {
    for r in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|c| x[(r, c)].to_string()).collect();
        writeln!(writer, "{}", row.join(","))?;
    }
    Ok(())
}

/// Reads the format of [`write_dense_csv`]; `#` lines are skipped.
pub fn read_dense_csv<R: BufRead>(reader: R) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number {v:?} in dense CSV")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Config(format!(
                    "dense CSV row {} has {} values, expected {}",
                    rows.len() + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let m = rows.len();
    let n = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(m, n, |r, c| rows[r][c]))
}

impl SmoothLoss for CompletionProblem {
    fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    fn eval_and_gradient(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        self.check_shape(x)?;
        let mut grad = x - &self.observed;
        for (g, &keep) in grad.iter_mut().zip(&self.mask) {
            if !keep {
                *g = 0.0;
            }
        }
        let value = 0.5 * grad.norm_squared();
        Ok((value, grad))
    }

    fn lipschitz(&self) -> f64 {
        1.0
    }

    fn residual_norm(&self, x: &DMatrix<f64>) -> Result<f64> {
        self.check_shape(x)?;
        let sum: f64 = self
            .coords
            .iter()
            .map(|&(r, c)| {
                let d = x[(r, c)] - self.observed[(r, c)];
                d * d
            })
            .sum();
        Ok(sum.sqrt())
    }
}

type ForwardMap = Box<dyn Fn(&DMatrix<f64>) -> DVector<f64> + Send + Sync>;
type AdjointMap = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// `f(X) = 1/2 ||A(X) - b||^2` for a linear map `A` given with its adjoint.
pub struct AffineLoss {
    shape: (usize, usize),
    apply: ForwardMap,
    adjoint: AdjointMap,
    offset: DVector<f64>,
    lipschitz_bound: f64,
}

impl std::fmt::Debug for AffineLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AffineLoss")
            .field("shape", &self.shape)
            .field("len", &self.offset.len())
            .field("lipschitz_bound", &self.lipschitz_bound)
            .finish()
    }
}

impl AffineLoss {
    /// `lipschitz_bound` must upper-bound `rho(A* A)`; it is not checked.
    pub fn new(
        shape: (usize, usize),
        apply: impl Fn(&DMatrix<f64>) -> DVector<f64> + Send + Sync + 'static,
        adjoint: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        offset: DVector<f64>,
        lipschitz_bound: f64,
    ) -> Result<Self> {
        if !(lipschitz_bound.is_finite() && lipschitz_bound > 0.0) {
            return Err(Error::Parameter(format!(
                "lipschitz bound must be positive and finite, got {lipschitz_bound}"
            )));
        }
        Ok(AffineLoss {
            shape,
            apply: Box::new(apply),
            adjoint: Box::new(adjoint),
            offset,
            lipschitz_bound,
        })
    }

    /// `A` given as a dense `d x (m n)` matrix acting on the column-major
    /// vectorization of `X`.
    pub fn from_matrix(
        shape: (usize, usize),
        a: DMatrix<f64>,
        offset: DVector<f64>,
        lipschitz_bound: f64,
    ) -> Result<Self> {
        let (m, n) = shape;
        if a.ncols() != m * n || a.nrows() != offset.len() {
            return Err(Error::Precondition(format!(
                "operator is {}x{}, expected {}x{}",
                a.nrows(),
                a.ncols(),
                offset.len(),
                m * n
            )));
        }
        let a_t = a.transpose();
        Self::new(
            shape,
            move |x| &a * DVector::from_column_slice(x.as_slice()),
            move |y| DMatrix::from_column_slice(m, n, (&a_t * y).as_slice()),
            offset,
            lipschitz_bound,
        )
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> DVector<f64> {
        (self.apply)(x)
    }

    pub fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        (self.adjoint)(y)
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// Largest `|<A(X), y> - <X, A*(y)>|` over `probes` Gaussian pairs.
    pub fn adjoint_mismatch(&self, probes: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = self.shape;
        let d = self.offset.len();
        (0..probes)
            .map(|_| {
                let x = DMatrix::from_fn(m, n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
                let y = DVector::from_fn(d, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
                (self.apply(&x).dot(&y) - x.dot(&self.adjoint(&y))).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Power-iteration estimate of `rho(A* A)`. This is a helper only; the
    /// loss always reports the bound passed at construction.
    pub fn estimate_lipschitz(&self, iters: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = self.shape;
        let mut x = DMatrix::from_fn(m, n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let mut estimate = 0.0;
        for _ in 0..iters {
            let norm = x.norm();
            if norm == 0.0 {
                return 0.0;
            }
            x /= norm;
            let next = self.adjoint(&self.apply(&x));
            estimate = x.dot(&next);
            x = next;
        }
        estimate
    }
}

impl SmoothLoss for AffineLoss {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn eval_and_gradient(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        self.check_shape(x)?;
        let residual = self.apply(x) - &self.offset;
        let value = 0.5 * residual.norm_squared();
        Ok((value, self.adjoint(&residual)))
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz_bound
    }

    fn residual_norm(&self, x: &DMatrix<f64>) -> Result<f64> {
        self.check_shape(x)?;
        Ok((self.apply(x) - &self.offset).norm())
    }
}
