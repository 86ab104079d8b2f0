//! Image inpainting by per-channel low-rank completion.
//!
//! Each color channel is an `height x width` matrix in `[0, 255]`; pixels
//! marked corrupted are dropped from the observation set and the channel is
//! completed independently of the others.

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{solve_convex, ConvexConfig};
use crate::bench::Method;
use crate::error::{Error, Result};
use crate::losses::CompletionProblem;
use crate::penalties::{Penalty, PenaltyKind};
use crate::solver::{solve, LambdaSchedule, SolveReport, SolverConfig, COMPLETION_MU};
use crate::wsvt::WeightVector;

/// An 8-bit RGB image stored as three row-major planes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    planes: [Vec<u8>; 3],
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, planes: [Vec<u8>; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Precondition(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(Error::Precondition(format!(
                "each plane must hold {} pixels",
                width * height
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            planes,
        })
    }

    /// Builds an image from a per-pixel function returning `[r, g, b]`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self> {
        let mut planes = [
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
            Vec::with_capacity(width * height),
        ];
        for y in 0..height {
            for x in 0..width {
                let px = f(x, y);
                for (plane, v) in planes.iter_mut().zip(px) {
                    plane.push(v);
                }
            }
        }
        ImageBuffer::new(width, height, planes)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane(&self, channel: usize) -> &[u8] {
        &self.planes[channel]
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = y * self.width + x;
        [self.planes[0][i], self.planes[1][i], self.planes[2][i]]
    }

    /// Loads any PNG; gray and alpha channels are converted to RGB.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let rgb = image::open(path)?.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        ImageBuffer::from_fn(w, h, |x, y| rgb.get_pixel(x as u32, y as u32).0)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let img = image::RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Rgb(self.pixel(x as usize, y as usize))
        });
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Channel `c` as a `height x width` matrix of reals.
    pub fn channel_matrix(&self, channel: usize) -> DMatrix<f64> {
        let plane = &self.planes[channel];
        DMatrix::from_fn(self.height, self.width, |y, x| {
            f64::from(plane[y * self.width + x])
        })
    }

    /// Inverse of [`ImageBuffer::channel_matrix`], rounding and clamping to
    /// `[0, 255]`.
    pub fn from_channel_matrices(channels: &[DMatrix<f64>; 3]) -> Result<Self> {
        let (h, w) = channels[0].shape();
        if channels.iter().any(|c| c.shape() != (h, w)) {
            return Err(Error::Precondition(
                "channel matrices differ in shape".into(),
            ));
        }
        let planes = [0, 1, 2].map(|c| {
            let m = &channels[c];
            let mut plane = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    plane.push(to_u8(m[(y, x)]));
                }
            }
            plane
        });
        ImageBuffer::new(w, h, planes)
    }
}

fn to_u8(v: f64) -> u8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(0.0, 255.0) as u8
    }
}

/// Per-pixel observation flags shared by the three channels
/// (`true` = clean).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptionMask {
    width: usize,
    height: usize,
    observed: Vec<bool>,
}

impl CorruptionMask {
    pub fn new(width: usize, height: usize, observed: Vec<bool>) -> Result<Self> {
        if observed.len() != width * height {
            return Err(Error::Precondition(format!(
                "mask holds {} flags, expected {}",
                observed.len(),
                width * height
            )));
        }
        if !observed.iter().any(|&o| o) {
            return Err(Error::Precondition("mask leaves no observed pixel".into()));
        }
        Ok(CorruptionMask {
            width,
            height,
            observed,
        })
    }

    pub fn all_observed(width: usize, height: usize) -> Result<Self> {
        CorruptionMask::new(width, height, vec![true; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_observed(&self, x: usize, y: usize) -> bool {
        self.observed[y * self.width + x]
    }

    pub fn num_observed(&self) -> usize {
        self.observed.iter().filter(|&&o| o).count()
    }
}

/// Overwrites `round(fraction * pixels)` randomly chosen pixels with
/// independent uniform values on every channel.
pub fn corrupt_random(
    image: &ImageBuffer,
    fraction: f64,
    seed: u64,
) -> Result<(ImageBuffer, CorruptionMask)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Domain(format!(
            "corruption fraction must lie in [0, 1), got {fraction}"
        )));
    }
    let total = image.width * image.height;
    let count = (fraction * total as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, total, count).into_vec();
    chosen.sort_unstable();

    let mut out = image.clone();
    let mut observed = vec![true; total];
    for i in chosen {
        observed[i] = false;
        for plane in out.planes.iter_mut() {
            plane[i] = rng.random();
        }
    }
    let mask = CorruptionMask::new(image.width, image.height, observed)?;
    Ok((out, mask))
}

/// Marks every pixel where `mask_image` is nonzero (on any channel) as
/// corrupted and paints it white.
pub fn apply_text_mask(
    image: &ImageBuffer,
    mask_image: &ImageBuffer,
) -> Result<(ImageBuffer, CorruptionMask)> {
    if (image.width, image.height) != (mask_image.width, mask_image.height) {
        return Err(Error::Precondition(format!(
            "mask is {}x{}, image is {}x{}",
            mask_image.width, mask_image.height, image.width, image.height
        )));
    }
    let total = image.width * image.height;
    let observed: Vec<bool> = (0..total)
        .map(|i| mask_image.planes.iter().all(|p| p[i] == 0))
        .collect();
    let mask = CorruptionMask::new(image.width, image.height, observed)?;
    let mut out = image.clone();
    for (i, &clean) in mask.observed.iter().enumerate() {
        if !clean {
            for plane in out.planes.iter_mut() {
                plane[i] = 255;
            }
        }
    }
    Ok((out, mask))
}

/// Starting point of the nonconvex solve on each channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initialization {
    /// `X^0 = 0` with first-step weights at the continuation target.
    Zero,
    /// Solve the convex problem first, then reweight from its solution at
    /// fixed lambda. The uniform-weight convex solve acts as the first
    /// reweighting pass.
    ConvexWarmStart,
}

/// Continuation used for images. Natural images are only approximately low
/// rank, so the target keeps a moderate threshold instead of interpolating.
#[derive(Debug, Clone, PartialEq)]
pub struct InpaintOptions {
    pub method: Method,
    /// `lambda0 = lambda0_scale * ||P_Omega(M)||_inf`.
    pub lambda0_scale: f64,
    /// `target = target_ratio * lambda0`.
    pub target_ratio: f64,
    pub eta: f64,
    pub max_iters: usize,
    pub initialization: Initialization,
    /// Iterations of the reweighting pass after a convex warm start.
    pub refine_iters: usize,
}

impl InpaintOptions {
    pub fn new(method: Method) -> Self {
        InpaintOptions {
            method,
            lambda0_scale: 10.0,
            target_ratio: 0.02,
            eta: 0.7,
            max_iters: 500,
            initialization: Initialization::ConvexWarmStart,
            refine_iters: 300,
        }
    }

    fn lambdas(&self, problem: &CompletionProblem) -> (f64, f64) {
        let lambda0 = self.lambda0_scale * problem.observed_max_abs().max(f64::MIN_POSITIVE);
        (lambda0, self.target_ratio * lambda0)
    }

    fn convex(&self, problem: &CompletionProblem) -> Result<SolveReport> {
        let (lambda0, target) = self.lambdas(problem);
        let cfg = ConvexConfig {
            lambda: target,
            schedule: LambdaSchedule::Continuation {
                lambda0,
                eta: self.eta,
                target,
            },
            max_iters: self.max_iters,
            stop_step: Some(STOP_STEP * problem.observed_norm()),
            stop_residual: None,
            acceleration: true,
        };
        solve_convex(
            problem,
            &cfg,
            &DMatrix::zeros(problem.nrows(), problem.ncols()),
        )
    }

    /// Completes one channel matrix.
    pub fn complete(&self, problem: &CompletionProblem) -> Result<DMatrix<f64>> {
        let penalty = match &self.method {
            Method::Convex => return Ok(self.convex(problem)?.final_x),
            Method::Irnn(penalty) => penalty,
        };
        let (lambda0, target) = self.lambdas(problem);
        let s = problem.nrows().min(problem.ncols());
        let stop_step = Some(STOP_STEP * problem.observed_norm());
        let report = match self.initialization {
            Initialization::Zero => {
                // As in the noisy preset, the first step thresholds at the
                // target so that Lp does not start from the zero matrix.
                let cfg = SolverConfig {
                    mu: COMPLETION_MU,
                    schedule: LambdaSchedule::Continuation {
                        lambda0,
                        eta: self.eta,
                        target,
                    },
                    max_iters: self.max_iters,
                    stop_residual: None,
                    stop_step,
                    initial_weights: Some(WeightVector::uniform(target, s)?),
                    check_descent: true,
                };
                solve(
                    problem,
                    penalty,
                    &cfg,
                    &DMatrix::zeros(problem.nrows(), problem.ncols()),
                )?
            }
            Initialization::ConvexWarmStart => {
                let warm = self.convex(problem)?;
                let refined = penalty.with_lambda(refine_lambda(penalty, target))?;
                let cfg = SolverConfig {
                    initial_weights: Some(refined.weights_from_singular_values(&warm.final_sigma)?),
                    ..SolverConfig::fixed(self.refine_iters, STOP_STEP * problem.observed_norm())
                };
                solve(problem, &refined, &cfg, &warm.final_x)?
            }
        };
        Ok(report.final_x)
    }
}

const STOP_STEP: f64 = 1e-5;

/// Lambda of the reweighting pass. For Lp it puts the weight at
/// `sigma = tau` equal to the convex threshold `tau`
/// (`lambda p tau^(p-1) = tau`), so larger singular values are shrunk less
/// and smaller ones more; the other penalties already have weights at most
/// about `lambda` and use `tau` directly.
fn refine_lambda(penalty: &Penalty, tau: f64) -> f64 {
    match penalty.kind() {
        PenaltyKind::Lp => tau.powf(2.0 - penalty.p()) / penalty.p(),
        _ => tau,
    }
}

/// Completes the three channels in parallel. Every output pixel, clean ones
/// included, comes from the recovered matrices.
pub fn inpaint(
    image: &ImageBuffer,
    mask: &CorruptionMask,
    options: &InpaintOptions,
) -> Result<ImageBuffer> {
    if (image.width, image.height) != (mask.width, mask.height) {
        return Err(Error::Precondition(format!(
            "mask is {}x{}, image is {}x{}",
            mask.width, mask.height, image.width, image.height
        )));
    }
    let solved: Vec<Result<DMatrix<f64>>> = (0..3)
        .into_par_iter()
        .map(|c| {
            let full = image.channel_matrix(c);
            let problem = CompletionProblem::from_dense(&full, |y, x| mask.is_observed(x, y))?;
            options.complete(&problem)
        })
        .collect();
    let mut channels = Vec::with_capacity(3);
    for (channel, r) in solved.into_iter().enumerate() {
        channels.push(r.map_err(|e| Error::Channel {
            channel,
            source: Box::new(e),
        })?);
    }
    let channels: [DMatrix<f64>; 3] = channels.try_into().expect("three channels");
    ImageBuffer::from_channel_matrices(&channels)
}

/// Peak signal-to-noise ratio in dB with peak 255, averaging the squared
/// error over all pixels and channels. Identical images give `+inf`.
pub fn psnr(reference: &ImageBuffer, candidate: &ImageBuffer) -> Result<f64> {
    if (reference.width, reference.height) != (candidate.width, candidate.height) {
        return Err(Error::Precondition(format!(
            "images differ in size: {}x{} vs {}x{}",
            reference.width, reference.height, candidate.width, candidate.height
        )));
    }
    let mut sum = 0.0;
    for (a, b) in reference.planes.iter().zip(&candidate.planes) {
        for (&x, &y) in a.iter().zip(b) {
            let d = f64::from(x) - f64::from(y);
            sum += d * d;
        }
    }
    let mse = sum / (3 * reference.width * reference.height) as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn(w, h, |x, y| {
            [(x * 10) as u8, (y * 7) as u8, ((x + y) * 3) as u8]
        })
        .unwrap()
    }

    #[test]
    fn psnr_examples() {
        let a = gradient(4, 3);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let black = ImageBuffer::from_fn(4, 3, |_, _| [0; 3]).unwrap();
        let white = ImageBuffer::from_fn(4, 3, |_, _| [255; 3]).unwrap();
        assert!(psnr(&black, &white).unwrap().abs() < 1e-12);
        let one = ImageBuffer::from_fn(4, 3, |_, _| [1; 3]).unwrap();
        assert!((psnr(&black, &one).unwrap() - 48.130803608679).abs() < 1e-9);
        assert_eq!(psnr(&a, &black).unwrap(), psnr(&black, &a).unwrap());
        assert!(psnr(&a, &gradient(3, 4)).is_err());
    }

    #[test]
    fn random_corruption_counts_and_determinism() {
        let img = gradient(10, 8);
        let (c1, m1) = corrupt_random(&img, 0.5, 3).unwrap();
        let (c2, m2) = corrupt_random(&img, 0.5, 3).unwrap();
        assert_eq!((c1.clone(), m1.clone()), (c2, m2));
        assert_eq!(m1.num_observed(), 40);
        for y in 0..8 {
            for x in 0..10 {
                if m1.is_observed(x, y) {
                    assert_eq!(c1.pixel(x, y), img.pixel(x, y));
                }
            }
        }
        let (same, all) = corrupt_random(&img, 0.0, 3).unwrap();
        assert_eq!(same, img);
        assert_eq!(all.num_observed(), 80);
        assert!(corrupt_random(&img, 1.0, 3).is_err());
    }

    #[test]
    fn text_mask_rules() {
        let img = gradient(5, 4);
        let blank = ImageBuffer::from_fn(5, 4, |_, _| [0; 3]).unwrap();
        let (out, mask) = apply_text_mask(&img, &blank).unwrap();
        assert_eq!(out, img);
        assert_eq!(mask.num_observed(), 20);

        let stroke =
            ImageBuffer::from_fn(5, 4, |x, _| if x == 2 { [0, 9, 0] } else { [0; 3] }).unwrap();
        let (out, mask) = apply_text_mask(&img, &stroke).unwrap();
        assert_eq!(mask.num_observed(), 16);
        assert_eq!(out.pixel(2, 1), [255; 3]);
        assert!(!mask.is_observed(2, 3));

        let full = ImageBuffer::from_fn(5, 4, |_, _| [1, 0, 0]).unwrap();
        assert!(apply_text_mask(&img, &full).is_err());
        assert!(apply_text_mask(&img, &gradient(4, 5)).is_err());
    }

    #[test]
    fn channel_matrix_round_trip() {
        let img = gradient(6, 4);
        let chans = [0, 1, 2].map(|c| img.channel_matrix(c));
        assert_eq!(chans[0].shape(), (4, 6));
        assert_eq!(ImageBuffer::from_channel_matrices(&chans).unwrap(), img);
        let wild = [0, 1, 2].map(|_| DMatrix::from_element(2, 2, 400.0));
        assert_eq!(
            ImageBuffer::from_channel_matrices(&wild)
                .unwrap()
                .pixel(0, 0),
            [255; 3]
        );
    }

    #[test]
    fn rank_one_image_is_recovered() {
        let (w, h) = (40, 30);
        let img = ImageBuffer::from_fn(w, h, |x, y| {
            let v = (20.0 + 5.0 * x as f64) * (0.2 + 0.025 * y as f64);
            [v as u8, (v * 0.5) as u8, 200 - (v * 0.3) as u8]
        })
        .unwrap();
        let (bad, mask) = corrupt_random(&img, 0.5, 11).unwrap();
        for init in [Initialization::Zero, Initialization::ConvexWarmStart] {
            let mut opts = InpaintOptions::new(Method::Irnn(Penalty::lp(1.0, 0.5).unwrap()));
            opts.initialization = init;
            // From zero the first step must already be low rank: only the
            // leading component clears a threshold of ||P_Omega(M)||_inf.
            opts.target_ratio = match init {
                Initialization::Zero => 0.1,
                Initialization::ConvexWarmStart => 1e-3,
            };
            opts.max_iters = 2000;
            let out = inpaint(&bad, &mask, &opts).unwrap();
            assert!(
                psnr(&img, &out).unwrap() > psnr(&img, &bad).unwrap() + 10.0,
                "{init:?}"
            );
        }
    }
}
