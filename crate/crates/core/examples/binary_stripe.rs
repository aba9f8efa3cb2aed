//! Binary inpainting of a black/white edge hidden behind a square hole.
//!
//! ```text
//! cargo run --release --example binary_stripe -- [SIZE] [OUT_DIR]
//! ```
//!
//! Writes the damaged input, the mask, the result and the error map as PGM.

use std::path::PathBuf;

use ch_inpaint::evolution::TwoStageConfig;
use ch_inpaint::io::write_image;
use ch_inpaint::pipeline::{inpaint, InpaintJob, Mode};
use ch_inpaint::{Grayscale8Image, PotentialSpec};

fn main() -> ch_inpaint::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args
        .next()
        .map_or(64, |s| s.parse().expect("SIZE must be an integer"));
    let out_dir = args.next().map_or_else(
        || std::env::temp_dir().join("ch-inpaint-examples"),
        PathBuf::from,
    );
    std::fs::create_dir_all(&out_dir).expect("create output directory");

    let image = Grayscale8Image::from_fn(n, n, |x, _| if x < n / 2 { 0 } else { 255 })?;
    let side = (0.2 * (n * n) as f64).sqrt().round() as usize;
    let lo = (n - side) / 2;
    let hole = |v: usize| (lo..lo + side).contains(&v);
    let mask = Grayscale8Image::from_fn(n, n, |x, y| if hole(x) && hole(y) { 255 } else { 0 })?;
    let damaged = Grayscale8Image::from_fn(n, n, |x, y| {
        if hole(x) && hole(y) {
            128
        } else {
            image.get(x, y)
        }
    })?;

    // wide interface first, then a sharp one with stronger fidelity
    let schedule = TwoStageConfig::new(0.04, 1.0 / 300.0, 8e3, 1e5, 1e-5)?;
    let job = InpaintJob::new(
        image.clone(),
        mask.clone(),
        Mode::Binary,
        PotentialSpec::Obstacle,
        schedule,
    )?;
    let result = inpaint(&job)?;

    let ch = &result.channels[0];
    println!(
        "stage 1: {} steps, stop {:.2e}; stage 2: {} steps, stop {:.2e}",
        ch.stage1.steps_taken,
        ch.stage1.stop_value_final,
        ch.stage2.steps_taken,
        ch.stage2.stop_value_final
    );
    let wrong = result
        .error_map
        .pixels()
        .iter()
        .filter(|&&e| e != 0)
        .count();
    println!(
        "{wrong} of {} pixels differ from the undamaged image",
        n * n
    );

    write_image(&damaged, out_dir.join("stripe_damaged.pgm"))?;
    write_image(&mask, out_dir.join("stripe_mask.pgm"))?;
    write_image(
        &result.projected_image,
        out_dir.join("stripe_inpainted.pgm"),
    )?;
    write_image(&result.error_map, out_dir.join("stripe_error.pgm"))?;
    println!("images written to {}", out_dir.display());
    Ok(())
}
