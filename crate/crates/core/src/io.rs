//! Reading and writing 8-bit grayscale PGM (P2, P5) and PNG files.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Grayscale8Image;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Reads a PGM or PNG image, detected from the file contents.
pub fn read_image(path: impl AsRef<Path>) -> Result<Grayscale8Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(&bytes, path)
    } else {
        decode_pgm(&bytes, path)
    }
}

/// Writes PNG when the extension is `.png` (any case) and binary PGM otherwise.
pub fn write_image(img: &Grayscale8Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png {
        encode_png(img, path)?
    } else {
        encode_pgm(img)
    };
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Binary PGM: header `P5\n<w> <h>\n255\n` followed by the raw pixels.
pub fn encode_pgm(img: &Grayscale8Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

/// Plain PGM, at most 17 values per line.
pub fn encode_pgm_ascii(img: &Grayscale8Image) -> Vec<u8> {
    let mut out = format!("P2\n{} {}\n255\n", img.width(), img.height());
    for row in img.pixels().chunks(17) {
        let line: Vec<String> = row.iter().map(u8::to_string).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out.into_bytes()
}

/// Byte cursor over a PGM header that skips whitespace and `#` comments.
struct PgmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> PgmCursor<'a> {
    fn error(&self, offset: usize, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset,
            reason: reason.into(),
        }
    }

    fn skip_space(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Parses a decimal number and returns it with its byte offset.
    fn number(&mut self, what: &str) -> Result<(usize, usize)> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if start >= self.bytes.len() {
                self.error(start, format!("file ends before {what}"))
            } else {
                self.error(start, format!("expected {what}"))
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .expect("ascii digits")
            .parse()
            .map(|v| (v, start))
            .map_err(|_| self.error(start, format!("{what} out of range")))
    }
}

pub fn decode_pgm(bytes: &[u8], path: &Path) -> Result<Grayscale8Image> {
    let mut cur = PgmCursor {
        bytes,
        pos: 0,
        path,
    };
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err(cur.error(0, "not a P2/P5 PGM or PNG file")),
    };
    cur.pos = 2;
    let (width, width_at) = cur.number("width")?;
    let (height, _) = cur.number("height")?;
    if width == 0 || height == 0 {
        return Err(cur.error(width_at, format!("empty image {width}x{height}")));
    }
    let (maxval, maxval_at) = cur.number("maxval")?;
    if maxval != 255 {
        return Err(cur.error(maxval_at, format!("maxval must be 255, got {maxval}")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| cur.error(width_at, "image size overflows"))?;

    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        match bytes.get(cur.pos) {
            Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
            _ => return Err(cur.error(cur.pos, "expected whitespace after maxval")),
        }
        let end = cur.pos + count;
        if end > bytes.len() {
            return Err(cur.error(
                bytes.len(),
                format!("raster truncated, expected {count} bytes"),
            ));
        }
        bytes[cur.pos..end].to_vec()
    } else {
        let mut pixels = Vec::with_capacity(count);
        for _ in 0..count {
            let (v, at) = cur.number("pixel value")?;
            if v > 255 {
                return Err(cur.error(at, format!("pixel value {v} exceeds maxval")));
            }
            pixels.push(v as u8);
        }
        pixels
    };
    Grayscale8Image::new(width, height, pixels)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<Grayscale8Image> {
    let fail = |reason: String| Error::Format {
        path: path.to_path_buf(),
        offset: 0,
        reason,
    };
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| fail(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| fail("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| fail(e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(fail(format!(
            "expected 8-bit grayscale, got {:?} at {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let pixels = (0..h)
        .flat_map(|y| {
            buf[y * info.line_size..y * info.line_size + w]
                .iter()
                .copied()
        })
        .collect();
    Grayscale8Image::new(w, h, pixels)
}

fn encode_png(img: &Grayscale8Image, path: &Path) -> Result<Vec<u8>> {
    let fail = |e: png::EncodingError| Error::InvalidInput(format!("{}: {e}", path.display()));
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(fail)?;
        writer.write_image_data(img.pixels()).map_err(fail)?;
        writer.finish().map_err(fail)?;
    }
    Ok(out)
}
