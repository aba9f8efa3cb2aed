//! Reading and writing PGM (binary and plain) and 8-bit grayscale PNG.

use ch_inpaint::io::{encode_pgm_ascii, read_image, write_image};
use ch_inpaint::pipeline::{bit_assemble, bit_split};
use ch_inpaint::Grayscale8Image;

fn main() -> ch_inpaint::Result<()> {
    let dir = std::env::temp_dir().join("ch-inpaint-examples");
    std::fs::create_dir_all(&dir).expect("create output directory");
    let img = Grayscale8Image::from_fn(32, 16, |x, y| (x * 8 + y) as u8)?;

    for name in ["ramp.pgm", "ramp.png"] {
        let path = dir.join(name);
        write_image(&img, &path)?;
        let back = read_image(&path)?;
        println!(
            "{name}: {} bytes, round trip {}",
            std::fs::metadata(&path).unwrap().len(),
            back == img
        );
    }
    let plain = dir.join("ramp_plain.pgm");
    std::fs::write(&plain, encode_pgm_ascii(&img)).expect("write plain PGM");
    println!("ramp_plain.pgm: round trip {}", read_image(&plain)? == img);

    // dropping low bit planes quantizes the gray levels
    for k in [8, 4, 2, 1] {
        let coarse = bit_assemble(&bit_split(&img, k)?)?;
        let distinct = coarse
            .pixels()
            .iter()
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        println!("{k} bit planes: {distinct} distinct levels");
    }
    Ok(())
}
