//! The double-obstacle potential keeps `u` in `[-1, 1]`; the smooth quartic
//! double well does not.
//!
//! ```text
//! cargo run --release --example obstacle_vs_quartic -- [SIZE]
//! ```

use ch_inpaint::evolution::TwoStageConfig;
use ch_inpaint::pipeline::{inpaint, InpaintJob, Mode};
use ch_inpaint::{Grayscale8Image, PotentialSpec};

fn main() -> ch_inpaint::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .map_or(48, |s| s.parse().expect("SIZE must be an integer"));
    let image = Grayscale8Image::from_fn(n, n, |x, _| if x < n / 2 { 0 } else { 255 })?;
    let (lo, hi) = (n / 2 - n / 5, n / 2 + n / 5);
    let mask = Grayscale8Image::from_fn(n, n, |x, y| {
        if (lo..hi).contains(&x) && (lo..hi).contains(&y) {
            255
        } else {
            0
        }
    })?;
    let schedule = TwoStageConfig::new(0.04, 1.0 / 300.0, 8e3, 1e5, 1e-5)?;

    println!(
        "{:<10} {:>8} {:>12} {:>10}",
        "potential", "steps", "peak |u|", "wrong px"
    );
    for pot in [PotentialSpec::Obstacle, PotentialSpec::Quartic] {
        let result = inpaint(&InpaintJob::new(
            image.clone(),
            mask.clone(),
            Mode::Binary,
            pot,
            schedule,
        )?)?;
        let ch = &result.channels[0];
        let peak = ch
            .stage1
            .max_abs_trace
            .iter()
            .chain(&ch.stage2.max_abs_trace)
            .fold(0.0_f64, |a, v| a.max(*v));
        let wrong = result
            .error_map
            .pixels()
            .iter()
            .filter(|&&e| e != 0)
            .count();
        println!(
            "{:<10} {:>8} {:>12.6} {:>10}",
            pot.name(),
            ch.stage1.steps_taken + ch.stage2.steps_taken,
            peak,
            wrong
        );
    }
    Ok(())
}
