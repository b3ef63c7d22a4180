//! Minimal portable anymap codec: reads 8- and 16-bit graymaps (P2/P5),
//! writes 8-bit graymaps (P5) and pixmaps (P6). No external codecs.

use crate::{Error, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Grayscale image with samples in `0..=maxval`, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl GrayImage {
    /// Intensity scaled to `[0, 1]`.
    pub fn intensity(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.width + c] as f64 / self.maxval as f64
    }
}

/// RGB image, 8 bits per channel, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Image(msg.into())
}

/// Reads one header token, skipping whitespace and `#` comments.
fn read_token(reader: &mut impl BufRead) -> Result<String> {
    let mut token = String::new();
    let mut in_comment = false;
    loop {
        let mut byte = [0u8; 1];
        match reader.read(&mut byte)? {
            0 => {
                if token.is_empty() {
                    return Err(bad("unexpected end of header"));
                }
                return Ok(token);
            }
            _ => {}
        }
        let ch = byte[0];
        if in_comment {
            if ch == b'\n' {
                in_comment = false;
            }
            continue;
        }
        match ch {
            b'#' => in_comment = true,
            b' ' | b'\t' | b'\r' | b'\n' => {
                if !token.is_empty() {
                    return Ok(token);
                }
            }
            _ => token.push(ch as char),
        }
    }
}

fn parse_dim(token: &str, what: &str) -> Result<usize> {
    let v: usize = token
        .parse()
        .map_err(|_| bad(format!("invalid {what} '{token}'")))?;
    if v == 0 {
        return Err(bad(format!("{what} must be positive")));
    }
    Ok(v)
}

/// Reads a P2 (ASCII) or P5 (binary) graymap. Binary rasters use one byte
/// per sample for `maxval < 256` and two big-endian bytes otherwise.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut reader = BufReader::new(file);
    let magic = read_token(&mut reader)?;
    let width = parse_dim(&read_token(&mut reader)?, "width")?;
    let height = parse_dim(&read_token(&mut reader)?, "height")?;
    let maxval: u32 = read_token(&mut reader)?
        .parse()
        .map_err(|_| bad("invalid maxval"))?;
    if maxval == 0 || maxval > 65_535 {
        return Err(bad(format!("maxval {maxval} out of range 1..=65535")));
    }
    let count = width * height;
    let pixels = match magic.as_str() {
        "P2" => {
            let mut pixels = Vec::with_capacity(count);
            for _ in 0..count {
                let v: u32 = read_token(&mut reader)?
                    .parse()
                    .map_err(|_| bad("invalid ASCII sample"))?;
                if v > maxval {
                    return Err(bad(format!("sample {v} exceeds maxval {maxval}")));
                }
                pixels.push(v as u16);
            }
            pixels
        }
        "P5" => {
            // the single whitespace byte after maxval was consumed by read_token
            let bytes_per = if maxval < 256 { 1 } else { 2 };
            let mut raw = vec![0u8; count * bytes_per];
            reader
                .read_exact(&mut raw)
                .map_err(|_| bad("truncated raster"))?;
            if bytes_per == 1 {
                raw.iter().map(|b| *b as u16).collect()
            } else {
                raw.chunks_exact(2)
                    .map(|c| u16::from_be_bytes([c[0], c[1]]))
                    .collect()
            }
        }
        other => return Err(bad(format!("unsupported magic '{other}' (want P2 or P5)"))),
    };
    Ok(GrayImage {
        width,
        height,
        maxval: maxval as u16,
        pixels,
    })
}

/// Reads a P6 (binary) pixmap with `maxval <= 255`.
pub fn read_ppm(path: impl AsRef<Path>) -> Result<RgbImage> {
    let file = std::fs::File::open(path.as_ref())?;
    let mut reader = BufReader::new(file);
    let magic = read_token(&mut reader)?;
    if magic != "P6" {
        return Err(bad(format!("unsupported magic '{magic}' (want P6)")));
    }
    let width = parse_dim(&read_token(&mut reader)?, "width")?;
    let height = parse_dim(&read_token(&mut reader)?, "height")?;
    let maxval: u32 = read_token(&mut reader)?
        .parse()
        .map_err(|_| bad("invalid maxval"))?;
    if maxval == 0 || maxval > 255 {
        return Err(bad("only 8-bit pixmaps supported"));
    }
    let mut pixels = vec![0u8; width * height * 3];
    reader
        .read_exact(&mut pixels)
        .map_err(|_| bad("truncated raster"))?;
    Ok(RgbImage {
        width,
        height,
        pixels,
    })
}

/// Writes an 8-bit binary graymap (P5).
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, gray: &[u8]) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(bad("image dimensions must be positive"));
    }
    if gray.len() != width * height {
        return Err(bad(format!(
            "expected {} samples, got {}",
            width * height,
            gray.len()
        )));
    }
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(gray)?;
    Ok(())
}

/// Writes an 8-bit binary pixmap (P6) from interleaved RGB samples.
pub fn write_ppm(path: impl AsRef<Path>, width: usize, height: usize, rgb: &[u8]) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(bad("image dimensions must be positive"));
    }
    if rgb.len() != width * height * 3 {
        return Err(bad(format!(
            "expected {} samples, got {}",
            width * height * 3,
            rgb.len()
        )));
    }
    let file = std::fs::File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("patterning-pnm-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn pgm_write_read_roundtrip() {
        let path = tmp("roundtrip.pgm");
        let pixels: Vec<u8> = (0..12).map(|i| (i * 20) as u8).collect();
        write_pgm(&path, 4, 3, &pixels).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.width, 4);
        assert_eq!(img.height, 3);
        assert_eq!(img.maxval, 255);
        assert_eq!(img.pixels, pixels.iter().map(|p| *p as u16).collect::<Vec<_>>());
    }

    #[test]
    fn ascii_pgm_with_comments_parses() {
        let path = tmp("ascii.pgm");
        let mut f = std::fs::File::create(&path).unwrap();
        write!(f, "P2\n# a comment\n2 2\n# another\n255\n0 128\n255 64\n").unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.pixels, vec![0, 128, 255, 64]);
    }

    #[test]
    fn sixteen_bit_pgm_reads_big_endian() {
        let path = tmp("deep.pgm");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(b"P5\n2 1\n65535\n").unwrap();
        f.write_all(&[0x01, 0x00, 0xff, 0xff]).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.maxval, 65535);
        assert_eq!(img.pixels, vec![256, 65535]);
    }

    #[test]
    fn truncated_raster_is_an_error() {
        let path = tmp("truncated.pgm");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(b"P5\n4 4\n255\n").unwrap();
        f.write_all(&[0u8; 3]).unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Image(_))));
    }

    #[test]
    fn wrong_magic_is_an_error() {
        let path = tmp("wrong.pgm");
        std::fs::write(&path, b"P7\n1 1\n255\n\0").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Image(_))));
    }

    #[test]
    fn ascii_sample_above_maxval_is_an_error() {
        let path = tmp("overflow.pgm");
        std::fs::write(&path, b"P2\n1 1\n15\n99\n").unwrap();
        assert!(matches!(read_pgm(&path), Err(Error::Image(_))));
    }

    #[test]
    fn ppm_write_read_roundtrip() {
        let path = tmp("roundtrip.ppm");
        let rgb: Vec<u8> = (0..2 * 2 * 3).map(|i| (i * 17) as u8).collect();
        write_ppm(&path, 2, 2, &rgb).unwrap();
        let img = read_ppm(&path).unwrap();
        assert_eq!(img.pixels, rgb);
    }

    #[test]
    fn zero_size_write_is_rejected() {
        assert!(write_pgm(tmp("zero.pgm"), 0, 4, &[]).is_err());
        assert!(write_ppm(tmp("zero.ppm"), 4, 0, &[]).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn arbitrary_gray_buffers_roundtrip(
                w in 1usize..24,
                h in 1usize..24,
                seed in 0u64..1000,
            ) {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let pixels: Vec<u8> = (0..w * h).map(|_| rng.gen()).collect();
                let path = tmp(&format!("prop-{w}x{h}-{seed}.pgm"));
                write_pgm(&path, w, h, &pixels).unwrap();
                let img = read_pgm(&path).unwrap();
                prop_assert_eq!(img.width, w);
                prop_assert_eq!(img.height, h);
                prop_assert_eq!(
                    img.pixels,
                    pixels.iter().map(|p| *p as u16).collect::<Vec<u16>>()
                );
            }
        }
    }
}
