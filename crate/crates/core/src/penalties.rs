//! Concave surrogates of the L0 norm applied to singular values.
//!
//! Every penalty here is concave and nondecreasing on `[0, inf)` with
//! `g(0) = 0`, so its supergradients are nonnegative and nonincreasing. That
//! ordering is what lets the reweighted subproblem be solved in closed form.
//!
//! | kind              | g(theta)                                         |
//! |-------------------|--------------------------------------------------|
//! | `Lp`              | `lambda * theta^p`                               |
//! | `Scad`            | three-branch quadratic spline, flat past `gamma*lambda` |
//! | `Logarithm`       | `lambda / ln(gamma+1) * ln(gamma*theta + 1)`     |
//! | `Mcp`             | `lambda*theta - theta^2/(2 gamma)`, flat past `gamma*lambda` |
//! | `CappedL1`        | `lambda * min(theta, gamma)`                     |
//! | `Etp`             | `lambda / (1-e^-gamma) * (1 - e^(-gamma*theta))` |
//! | `Geman`           | `lambda*theta / (theta + gamma)`                 |
//! | `Laplace`         | `lambda * (1 - e^(-theta/gamma))`                |
//! | `NuclearConvex`   | `lambda * theta`                                 |
//! | `TruncatedNuclear`| `0` for the leading `r` indices, `lambda*theta` after |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::wsvt::WeightVector;

/// Family of the surrogate function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PenaltyKind {
    Lp,
    Scad,
    Logarithm,
    Mcp,
    CappedL1,
    Etp,
    Geman,
    Laplace,
    NuclearConvex,
    TruncatedNuclear,
}

impl PenaltyKind {
    /// The eight nonconvex surrogates of the L0 norm (excludes the convex
    /// nuclear norm and the index-dependent truncated nuclear norm).
    pub const SURROGATES: [PenaltyKind; 8] = [
        PenaltyKind::Lp,
        PenaltyKind::Scad,
        PenaltyKind::Logarithm,
        PenaltyKind::Mcp,
        PenaltyKind::CappedL1,
        PenaltyKind::Etp,
        PenaltyKind::Geman,
        PenaltyKind::Laplace,
    ];

    pub const ALL: [PenaltyKind; 10] = [
        PenaltyKind::Lp,
        PenaltyKind::Scad,
        PenaltyKind::Logarithm,
        PenaltyKind::Mcp,
        PenaltyKind::CappedL1,
        PenaltyKind::Etp,
        PenaltyKind::Geman,
        PenaltyKind::Laplace,
        PenaltyKind::NuclearConvex,
        PenaltyKind::TruncatedNuclear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::Lp => "lp",
            PenaltyKind::Scad => "scad",
            PenaltyKind::Logarithm => "logarithm",
            PenaltyKind::Mcp => "mcp",
            PenaltyKind::CappedL1 => "capped-l1",
            PenaltyKind::Etp => "etp",
            PenaltyKind::Geman => "geman",
            PenaltyKind::Laplace => "laplace",
            PenaltyKind::NuclearConvex => "nuclear",
            PenaltyKind::TruncatedNuclear => "truncated",
        }
    }

    /// Default shape parameter `gamma`. These are tuning knobs; `Lp`,
    /// `NuclearConvex` and `TruncatedNuclear` ignore it.
    pub fn default_gamma(self) -> f64 {
        match self {
            PenaltyKind::Scad => 3.7,
            PenaltyKind::Logarithm => 10.0,
            PenaltyKind::Mcp => 1.5,
            PenaltyKind::Etp => 2.0,
            PenaltyKind::CappedL1
            | PenaltyKind::Geman
            | PenaltyKind::Laplace
            | PenaltyKind::Lp
            | PenaltyKind::NuclearConvex
            | PenaltyKind::TruncatedNuclear => 1.0,
        }
    }

    fn uses_gamma(self) -> bool {
        !matches!(
            self,
            PenaltyKind::Lp | PenaltyKind::NuclearConvex | PenaltyKind::TruncatedNuclear
        )
    }
}

impl fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        Ok(match normalized.as_str() {
            "lp" | "schatten-p" => PenaltyKind::Lp,
            "scad" => PenaltyKind::Scad,
            "log" | "logarithm" => PenaltyKind::Logarithm,
            "mcp" => PenaltyKind::Mcp,
            "capped-l1" | "cappedl1" | "capped" => PenaltyKind::CappedL1,
            "etp" => PenaltyKind::Etp,
            "geman" => PenaltyKind::Geman,
            "laplace" => PenaltyKind::Laplace,
            "nuclear" | "nuclear-convex" | "convex" => PenaltyKind::NuclearConvex,
            "truncated" | "truncated-nuclear" | "tnn" => PenaltyKind::TruncatedNuclear,
            _ => return Err(Error::Parameter(format!("unknown penalty kind `{s}`"))),
        })
    }
}

/// A value in `[0, +inf]`. `Infinite` compares greater than every finite value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedWeight {
    Finite(f64),
    Infinite,
}

impl ExtendedWeight {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedWeight::Finite(_))
    }

    /// Finite payload, or `None` for `Infinite`.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedWeight::Finite(v) => Some(v),
            ExtendedWeight::Infinite => None,
        }
    }

    /// Lossy view as `f64`; `Infinite` maps to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    /// Multiplies by a positive scalar; `Infinite` stays infinite.
    pub fn scale(self, factor: f64) -> ExtendedWeight {
        match self {
            ExtendedWeight::Finite(v) => ExtendedWeight::Finite(v * factor),
            ExtendedWeight::Infinite => ExtendedWeight::Infinite,
        }
    }

    /// `self * sigma` with the convention `inf * 0 = 0`.
    pub fn times(self, sigma: f64) -> f64 {
        match self {
            ExtendedWeight::Finite(v) => v * sigma,
            ExtendedWeight::Infinite if sigma == 0.0 => 0.0,
            ExtendedWeight::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for ExtendedWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedWeight::Finite(v) => write!(f, "{v}"),
            ExtendedWeight::Infinite => f.write_str("inf"),
        }
    }
}

/// A validated penalty: kind plus parameters.
///
/// Values are immutable; use the `with_*` methods to derive variants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    kind: PenaltyKind,
    lambda: f64,
    gamma: f64,
    p: f64,
    trunc_rank: usize,
}

impl Penalty {
    /// Penalty of the given kind with default shape parameters.
    pub fn new(kind: PenaltyKind, lambda: f64) -> Result<Self> {
        let penalty = Penalty {
            kind,
            lambda,
            gamma: kind.default_gamma(),
            p: 0.5,
            trunc_rank: 0,
        };
        penalty.validate()?;
        Ok(penalty)
    }

    pub fn lp(lambda: f64, p: f64) -> Result<Self> {
        Self::new(PenaltyKind::Lp, lambda)?.with_p(p)
    }

    pub fn scad(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::Scad, lambda)?.with_gamma(gamma)
    }

    pub fn logarithm(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::Logarithm, lambda)?.with_gamma(gamma)
    }

    pub fn mcp(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::Mcp, lambda)?.with_gamma(gamma)
    }

    pub fn capped_l1(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::CappedL1, lambda)?.with_gamma(gamma)
    }

    pub fn etp(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::Etp, lambda)?.with_gamma(gamma)
    }

    pub fn geman(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::Geman, lambda)?.with_gamma(gamma)
    }

    pub fn laplace(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyKind::Laplace, lambda)?.with_gamma(gamma)
    }

    pub fn nuclear(lambda: f64) -> Result<Self> {
        Self::new(PenaltyKind::NuclearConvex, lambda)
    }

    /// Truncated nuclear norm: the `rank` leading singular values are free,
    /// the rest are charged `lambda` each.
    pub fn truncated_nuclear(rank: usize, lambda: f64) -> Result<Self> {
        Self::new(PenaltyKind::TruncatedNuclear, lambda)?.with_trunc_rank(rank)
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn trunc_rank(&self) -> usize {
        self.trunc_rank
    }

    /// Whether the penalty depends on the singular value's index.
    pub fn is_index_dependent(&self) -> bool {
        self.kind == PenaltyKind::TruncatedNuclear
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        self.lambda = lambda;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_p(mut self, p: f64) -> Result<Self> {
        self.p = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_trunc_rank(mut self, rank: usize) -> Result<Self> {
        self.trunc_rank = rank;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Parameter(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if self.kind.uses_gamma() && !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Parameter(format!(
                "{}: gamma must be positive and finite, got {}",
                self.kind, self.gamma
            )));
        }
        if self.kind == PenaltyKind::Scad && self.gamma <= 1.0 {
            return Err(Error::Parameter(format!(
                "scad: gamma must exceed 1, got {}",
                self.gamma
            )));
        }
        if self.kind == PenaltyKind::Lp && !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Parameter(format!(
                "lp: p must lie in (0, 1), got {}",
                self.p
            )));
        }
        Ok(())
    }

    /// `g(theta)` for index-free penalties.
    pub fn value(&self, theta: f64) -> Result<f64> {
        if self.is_index_dependent() {
            return Err(Error::Precondition(
                "truncated nuclear penalty needs an index; use value_at_index".into(),
            ));
        }
        check_theta(theta)?;
        Ok(self.eval(theta))
    }

    /// `g_i(theta)` for the singular value at zero-based position `index`.
    pub fn value_at_index(&self, index: usize, theta: f64) -> Result<f64> {
        check_theta(theta)?;
        if self.is_index_dependent() {
            return Ok(if index < self.trunc_rank {
                0.0
            } else {
                self.lambda * theta
            });
        }
        Ok(self.eval(theta))
    }

    /// One element of the superdifferential at `theta`.
    ///
    /// Where the superdifferential is an interval (capped L1 at `gamma`) the
    /// right limit is returned. `Lp` at zero returns `Infinite`.
    pub fn supergradient(&self, theta: f64) -> Result<ExtendedWeight> {
        if self.is_index_dependent() {
            return Err(Error::Precondition(
                "truncated nuclear penalty needs an index; use supergradient_at_index".into(),
            ));
        }
        check_theta(theta)?;
        Ok(self.super_eval(theta))
    }

    pub fn supergradient_at_index(&self, index: usize, theta: f64) -> Result<ExtendedWeight> {
        check_theta(theta)?;
        if self.is_index_dependent() {
            return Ok(ExtendedWeight::Finite(if index < self.trunc_rank {
                0.0
            } else {
                self.lambda
            }));
        }
        Ok(self.super_eval(theta))
    }

    /// `sum_i g_i(sigma_i)` over a spectrum.
    pub fn spectral_value(&self, sigma: &[f64]) -> Result<f64> {
        sigma
            .iter()
            .enumerate()
            .map(|(i, &s)| self.value_at_index(i, s))
            .sum()
    }

    /// Reweighting step: `w_i` is a supergradient at `sigma_i`.
    ///
    /// `sigma` must be sorted nonincreasing; the result is then nondecreasing.
    pub fn weights_from_singular_values(&self, sigma: &[f64]) -> Result<WeightVector> {
        if let Some(pos) = sigma.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::Precondition(format!(
                "singular values must be nonincreasing; sigma[{}]={} < sigma[{}]={}",
                pos,
                sigma[pos],
                pos + 1,
                sigma[pos + 1]
            )));
        }
        let weights = sigma
            .iter()
            .enumerate()
            .map(|(i, &s)| self.supergradient_at_index(i, s))
            .collect::<Result<Vec<_>>>()?;
        WeightVector::new(weights)
    }

    fn eval(&self, theta: f64) -> f64 {
        let Penalty {
            lambda, gamma, p, ..
        } = *self;
        match self.kind {
            PenaltyKind::Lp => lambda * theta.powf(p),
            PenaltyKind::Scad => {
                if theta <= lambda {
                    lambda * theta
                } else if theta <= gamma * lambda {
                    (-theta * theta + 2.0 * gamma * lambda * theta - lambda * lambda)
                        / (2.0 * (gamma - 1.0))
                } else {
                    lambda * lambda * (gamma + 1.0) / 2.0
                }
            }
            PenaltyKind::Logarithm => lambda / gamma.ln_1p() * (gamma * theta).ln_1p(),
            PenaltyKind::Mcp => {
                if theta < gamma * lambda {
                    lambda * theta - theta * theta / (2.0 * gamma)
                } else {
                    0.5 * gamma * lambda * lambda
                }
            }
            PenaltyKind::CappedL1 => {
                if theta < gamma {
                    lambda * theta
                } else {
                    lambda * gamma
                }
            }
            PenaltyKind::Etp => lambda * (-gamma * theta).exp_m1() / (-gamma).exp_m1(),
            PenaltyKind::Geman => lambda * theta / (theta + gamma),
            PenaltyKind::Laplace => -lambda * (-theta / gamma).exp_m1(),
            PenaltyKind::NuclearConvex | PenaltyKind::TruncatedNuclear => lambda * theta,
        }
    }

    fn super_eval(&self, theta: f64) -> ExtendedWeight {
        let Penalty {
            lambda, gamma, p, ..
        } = *self;
        let v = match self.kind {
            PenaltyKind::Lp => {
                if theta == 0.0 {
                    return ExtendedWeight::Infinite;
                }
                lambda * p * theta.powf(p - 1.0)
            }
            PenaltyKind::Scad => {
                if theta <= lambda {
                    lambda
                } else if theta <= gamma * lambda {
                    (gamma * lambda - theta) / (gamma - 1.0)
                } else {
                    0.0
                }
            }
            PenaltyKind::Logarithm => gamma * lambda / ((gamma * theta + 1.0) * gamma.ln_1p()),
            PenaltyKind::Mcp => {
                if theta < gamma * lambda {
                    lambda - theta / gamma
                } else {
                    0.0
                }
            }
            // right limit at theta == gamma
            PenaltyKind::CappedL1 => {
                if theta < gamma {
                    lambda
                } else {
                    0.0
                }
            }
            PenaltyKind::Etp => lambda * gamma * (-gamma * theta).exp() / -(-gamma).exp_m1(),
            PenaltyKind::Geman => lambda * gamma / ((theta + gamma) * (theta + gamma)),
            PenaltyKind::Laplace => lambda / gamma * (-theta / gamma).exp(),
            PenaltyKind::NuclearConvex | PenaltyKind::TruncatedNuclear => lambda,
        };
        ExtendedWeight::Finite(v.max(0.0))
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_nan() || theta < 0.0 {
        return Err(Error::Domain(format!(
            "penalty argument must be nonnegative, got {theta}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn finite(w: ExtendedWeight) -> f64 {
        w.finite().expect("finite weight")
    }

    #[test]
    fn table_values() {
        assert_relative_eq!(Penalty::lp(1.0, 0.5).unwrap().value(4.0).unwrap(), 2.0);
        assert_relative_eq!(
            Penalty::scad(1.0, 3.7).unwrap().value(10.0).unwrap(),
            2.35,
            epsilon = 1e-14
        );
        assert_relative_eq!(
            Penalty::capped_l1(2.0, 3.0).unwrap().value(5.0).unwrap(),
            6.0
        );
    }

    #[test]
    fn every_kind_vanishes_at_zero() {
        for kind in PenaltyKind::ALL {
            let pen = Penalty::new(kind, 1.3).unwrap().with_trunc_rank(1).unwrap();
            for i in 0..3 {
                assert_eq!(pen.value_at_index(i, 0.0).unwrap(), 0.0, "{kind}");
            }
        }
    }

    #[test]
    fn table_supergradients() {
        let lp = Penalty::lp(1.0, 0.5).unwrap();
        assert_relative_eq!(finite(lp.supergradient(4.0).unwrap()), 0.25);
        assert_eq!(lp.supergradient(0.0).unwrap(), ExtendedWeight::Infinite);
        assert_eq!(
            finite(Penalty::mcp(1.0, 2.0).unwrap().supergradient(3.0).unwrap()),
            0.0
        );
        let capped = Penalty::capped_l1(2.0, 3.0).unwrap();
        assert_eq!(finite(capped.supergradient(3.0).unwrap()), 0.0);
        assert_eq!(finite(capped.supergradient(2.999).unwrap()), 2.0);
    }

    #[test]
    fn scad_boundaries_use_earlier_branch() {
        let scad = Penalty::scad(2.0, 3.0).unwrap();
        // theta == lambda: linear branch
        assert_eq!(scad.value(2.0).unwrap(), 4.0);
        assert_eq!(finite(scad.supergradient(2.0).unwrap()), 2.0);
        // theta == gamma*lambda: quadratic branch, which meets the constant
        let q = scad.value(6.0).unwrap();
        assert_relative_eq!(q, 2.0 * 2.0 * 4.0 / 2.0, epsilon = 1e-12);
        assert_eq!(finite(scad.supergradient(6.0).unwrap()), 0.0);
    }

    #[test]
    fn weights_for_lp() {
        let w = Penalty::lp(1.0, 0.5)
            .unwrap()
            .weights_from_singular_values(&[3.0, 2.0, 1.0])
            .unwrap();
        let got: Vec<f64> = w.iter().map(|w| finite(*w)).collect();
        let expected = [0.288675134594813, 0.353553390593274, 0.5];
        for (g, e) in got.iter().zip(expected) {
            assert_relative_eq!(*g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn equal_singular_values_give_equal_weights() {
        for kind in PenaltyKind::SURROGATES {
            let w = Penalty::new(kind, 0.7)
                .unwrap()
                .weights_from_singular_values(&[5.0, 5.0])
                .unwrap();
            assert_eq!(w[0], w[1], "{kind}");
        }
    }

    #[test]
    fn truncated_weights_pattern() {
        let w = Penalty::truncated_nuclear(2, 1.0)
            .unwrap()
            .weights_from_singular_values(&[4.0, 2.0, 0.5, 0.0])
            .unwrap();
        let got: Vec<f64> = w.iter().map(|w| finite(*w)).collect();
        assert_eq!(got, vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn unsorted_sigma_is_rejected() {
        let err = Penalty::nuclear(1.0)
            .unwrap()
            .weights_from_singular_values(&[1.0, 2.0]);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn negative_theta_is_a_domain_error() {
        let pen = Penalty::geman(1.0, 1.0).unwrap();
        assert!(matches!(pen.value(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(pen.supergradient(-1.0), Err(Error::Domain(_))));
        assert!(matches!(pen.value(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_parameters() {
        assert!(Penalty::lp(1.0, 1.0).is_err());
        assert!(Penalty::lp(1.0, 0.0).is_err());
        assert!(Penalty::scad(1.0, 1.0).is_err());
        assert!(Penalty::mcp(1.0, 0.0).is_err());
        assert!(Penalty::nuclear(0.0).is_err());
        assert!(Penalty::nuclear(f64::INFINITY).is_err());
        assert!(Penalty::laplace(-1.0, 1.0).is_err());
    }

    #[test]
    fn truncated_requires_index() {
        let pen = Penalty::truncated_nuclear(1, 1.0).unwrap();
        assert!(pen.value(1.0).is_err());
        assert_eq!(pen.value_at_index(0, 3.0).unwrap(), 0.0);
        assert_eq!(pen.value_at_index(1, 3.0).unwrap(), 3.0);
    }

    #[test]
    fn extended_ordering() {
        assert!(ExtendedWeight::Infinite > ExtendedWeight::Finite(f64::MAX));
        assert!(ExtendedWeight::Finite(1.0) < ExtendedWeight::Finite(2.0));
        assert_eq!(ExtendedWeight::Infinite.times(0.0), 0.0);
        assert_eq!(ExtendedWeight::Infinite.times(1e-300), f64::INFINITY);
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in PenaltyKind::ALL {
            assert_eq!(kind.name().parse::<PenaltyKind>().unwrap(), kind);
        }
        assert!("bogus".parse::<PenaltyKind>().is_err());
    }
}
