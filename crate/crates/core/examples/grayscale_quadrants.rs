//! Grayscale inpainting through eight bit planes, one thread per plane.
//!
//! ```text
//! cargo run --release --example grayscale_quadrants -- [SIZE] [OUT_DIR]
//! ```

use std::path::PathBuf;

use ch_inpaint::config::parse_config;
use ch_inpaint::config::preset;
use ch_inpaint::io::write_image;
use ch_inpaint::pipeline::{inpaint, InpaintJob};
use ch_inpaint::Grayscale8Image;

const LEVELS: [u8; 4] = [40, 100, 170, 230];

fn main() -> ch_inpaint::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args
        .next()
        .map_or(48, |s| s.parse().expect("SIZE must be an integer"));
    let out_dir = args.next().map_or_else(
        || std::env::temp_dir().join("ch-inpaint-examples"),
        PathBuf::from,
    );
    std::fs::create_dir_all(&out_dir).expect("create output directory");

    let c = n / 2;
    let image = Grayscale8Image::from_fn(n, n, |x, y| {
        LEVELS[(x >= c) as usize + 2 * (y >= c) as usize]
    })?;
    // a cross of damaged pixels over the quadrant boundaries
    let mask = Grayscale8Image::from_fn(n, n, |x, y| {
        if x.abs_diff(c) < 3 || y.abs_diff(c) < 3 {
            255
        } else {
            0
        }
    })?;

    // the fig6 preset holds the grayscale parameters and the 1e-7 tolerance
    let cfg = parse_config(preset("fig6").expect("bundled preset"))?;
    let job = InpaintJob::new(
        image.clone(),
        mask,
        cfg.mode_spec()?,
        cfg.potential_spec()?,
        cfg.schedule()?,
    )?;
    let result = inpaint(&job)?;

    for (k, ch) in result.channels.iter().enumerate() {
        println!(
            "bit {}: {:>4} + {:>3} steps{}",
            7 - k,
            ch.stage1.steps_taken,
            ch.stage2.steps_taken,
            if ch.is_clean() {
                ""
            } else {
                " (did not converge)"
            }
        );
    }
    let agree = image
        .pixels()
        .iter()
        .zip(result.projected_image.pixels())
        .filter(|(a, b)| a == b)
        .count();
    println!(
        "{:.2}% of pixels match the original",
        100.0 * agree as f64 / (n * n) as f64
    );

    write_image(
        &result.projected_image,
        out_dir.join("quadrants_inpainted.png"),
    )?;
    write_image(&result.error_map, out_dir.join("quadrants_error.png"))?;
    println!("images written to {}", out_dir.display());
    Ok(())
}
