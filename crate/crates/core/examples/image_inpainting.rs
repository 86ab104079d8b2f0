//! Recovers the bundled 256x256 photo after half its pixels are replaced by
//! random values, solving each color channel as a matrix completion problem.
//! Writes the corrupted and recovered images next to the working directory.
//!
//! cargo run --release --example image_inpainting [fraction] [out-dir]

use std::path::PathBuf;

use irnn::bench::Method;
use irnn::imaging::{corrupt_random, inpaint, psnr, ImageBuffer, InpaintOptions};
use irnn::Penalty;

fn main() -> irnn::Result<()> {
    let mut args = std::env::args().skip(1);
    let fraction: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let out_dir = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));

    let original =
        ImageBuffer::load_png(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/astronaut.png"))?;
    let (corrupted, mask) = corrupt_random(&original, fraction, 1)?;
    corrupted.save_png(out_dir.join("corrupted.png"))?;
    println!("corrupted: {:.2} dB", psnr(&original, &corrupted)?);

    for method in [Method::Convex, Method::Irnn(Penalty::lp(1.0, 0.5)?)] {
        let started = std::time::Instant::now();
        let recovered = inpaint(&corrupted, &mask, &InpaintOptions::new(method))?;
        recovered.save_png(out_dir.join(format!("{}.png", method.name())))?;
        println!(
            "{}: {:.2} dB in {:.1}s",
            method.name(),
            psnr(&original, &recovered)?,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
