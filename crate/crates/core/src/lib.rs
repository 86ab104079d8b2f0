//! Nonconvex low-rank matrix recovery by iteratively reweighted nuclear norm
//! minimization.
//!
//! The solver minimizes `sum_i g(sigma_i(X)) + f(X)` where `g` is a concave,
//! nondecreasing surrogate of the L0 norm applied to the singular values and
//! `f` is a smooth loss. Each iteration solves a weighted singular value
//! thresholding problem in closed form, with the weights taken from the
//! supergradients of `g` at the current singular values.
//!
//! * [`penalties`]: the surrogate functions and their supergradients.
//! * [`wsvt`]: SVD and weighted singular value thresholding.
//! * [`losses`]: matrix completion and general affine squared losses.
//! * [`solver`]: the reweighted solver with lambda continuation.
//! * [`baselines`]: accelerated proximal gradient on the nuclear norm.
//! * [`bench`]: seeded synthetic experiments.
//! * [`imaging`]: per-channel image inpainting and PSNR.
//! * [`cli`]: the `irnn` command-line front end.

pub mod baselines;
pub mod bench;
pub mod cli;
pub mod error;
pub mod imaging;
pub mod losses;
pub mod penalties;
pub mod solver;
pub mod wsvt;

pub use error::{Error, Result};
pub use losses::{AffineLoss, CompletionProblem, SmoothLoss};
pub use penalties::{ExtendedWeight, Penalty, PenaltyKind};
pub use solver::{solve, solve_truncated, LambdaSchedule, SolveReport, SolverConfig, Termination};
pub use wsvt::WeightVector;
