//! PGM (P5, 8-bit) and grayscale PNG readers/writers.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

/// Writes an 8-bit binary PGM (P5).
pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut out = Vec::new();
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height())?;
    out.extend_from_slice(&img.to_u8());
    fs::write(path, out)?;
    Ok(())
}

/// Reads an 8-bit binary PGM (P5). Comments (`#`) in the header are honored.
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    parse_pgm(&bytes).map_err(|m| Error::Format(format!("{}: {m}", path.display())))
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let mut pos = 0usize;

    let next_token = |pos: &mut usize| -> std::result::Result<Vec<u8>, String> {
        // Skip whitespace and comment lines.
        loop {
            while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if *pos < bytes.len() && bytes[*pos] == b'#' {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            } else {
                break;
            }
        }
        let start = *pos;
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err("unexpected end of header".into());
        }
        Ok(bytes[start..*pos].to_vec())
    };

    let magic = next_token(&mut pos)?;
    if magic != b"P5" {
        return Err("not a P5 PGM".into());
    }
    let parse_num = |tok: Vec<u8>| -> std::result::Result<usize, String> {
        String::from_utf8(tok)
            .map_err(|_| "bad header token".to_string())?
            .parse::<usize>()
            .map_err(|_| "bad header number".to_string())
    };
    let width = parse_num(next_token(&mut pos)?)?;
    let height = parse_num(next_token(&mut pos)?)?;
    let maxval = parse_num(next_token(&mut pos)?)?;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, expected 255"));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if bytes.len() < pos + width * height {
        return Err("truncated raster".into());
    }
    GrayImage::from_u8(width, height, &bytes[pos..pos + width * height]).map_err(|e| e.to_string())
}

/// Writes an 8-bit grayscale PNG.
pub fn write_png(path: &Path, img: &GrayImage) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_u8())
        .expect("buffer length checked by construction");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Reads a PNG and converts it to 8-bit grayscale.
pub fn read_png(path: &Path) -> Result<GrayImage> {
    let img = image::open(path)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .into_luma8();
    GrayImage::from_u8(img.width() as usize, img.height() as usize, img.as_raw())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let img = GrayImage::from_fn(5, 3, |x, y| (x + y) as f64 / 10.0).unwrap();
        write_pgm(&path, &img).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back.to_u8(), img.to_u8());
    }

    #[test]
    fn pgm_with_comment() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.pgm");
        fs::write(&path, b"P5\n# a comment\n2 1\n255\n\x00\xff").unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        let img = GrayImage::from_fn(4, 4, |x, y| ((x * y) % 7) as f64 / 7.0).unwrap();
        write_png(&path, &img).unwrap();
        let back = read_png(&path).unwrap();
        assert_eq!(back.to_u8(), img.to_u8());
    }

    #[test]
    fn malformed_pgm_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pgm");
        fs::write(&path, b"P2\n2 1\n255\n01").unwrap();
        assert!(read_pgm(&path).is_err());
    }
}
