//! IDX (MNIST) image and label files, big-endian.
//!
//! Image files carry magic `0x00000803` (u8 data, 3 dimensions), label files
//! `0x00000801`.

use std::fs;
use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(bytes: &[u8], pos: usize, what: &str) -> Result<u32> {
    bytes
        .get(pos..pos + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("truncated IDX header reading {what}")))
}

/// Reads an IDX image file into gray rasters (`v / 255`).
pub fn read_images(path: &Path) -> Result<Vec<GrayImage>> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, "magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}",
            path.display()
        )));
    }
    let count = read_u32_be(&bytes, 4, "count")? as usize;
    let rows = read_u32_be(&bytes, 8, "rows")? as usize;
    let cols = read_u32_be(&bytes, 12, "cols")? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: payload is {} bytes, header implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let mut images = Vec::with_capacity(count);
    for i in 0..count {
        let start = 16 + i * rows * cols;
        images.push(GrayImage::from_u8(
            cols,
            rows,
            &bytes[start..start + rows * cols],
        )?);
    }
    Ok(images)
}

/// Reads an IDX label file.
pub fn read_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    let magic = read_u32_be(&bytes, 0, "magic")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}",
            path.display()
        )));
    }
    let count = read_u32_be(&bytes, 4, "count")? as usize;
    if bytes.len() != 8 + count {
        return Err(Error::Format(format!(
            "{}: payload is {} bytes, header implies {}",
            path.display(),
            bytes.len(),
            8 + count
        )));
    }
    Ok(bytes[8..].to_vec())
}

/// Writes gray rasters as an IDX image file. All images must share dimensions.
pub fn write_images(path: &Path, images: &[GrayImage]) -> Result<()> {
    let (rows, cols) = match images.first() {
        Some(img) => (img.height(), img.width()),
        None => return Err(Error::InvalidInput("cannot write empty IDX corpus".into())),
    };
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        if img.height() != rows || img.width() != cols {
            return Err(Error::InvalidInput(
                "IDX corpus images must share dimensions".into(),
            ));
        }
        out.extend_from_slice(&img.to_u8());
    }
    fs::write(path, out)?;
    Ok(())
}

/// Writes an IDX label file.
pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let imgs: Vec<GrayImage> = (0..3)
            .map(|i| GrayImage::from_fn(4, 4, |x, y| ((x + y + i) % 5) as f64 / 5.0).unwrap())
            .collect();
        let ip = dir.path().join("imgs.idx");
        let lp = dir.path().join("lbls.idx");
        write_images(&ip, &imgs).unwrap();
        write_labels(&lp, &[7, 1, 3]).unwrap();

        let back = read_images(&ip).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in back.iter().zip(&imgs) {
            assert_eq!(a.to_u8(), b.to_u8());
        }
        assert_eq!(read_labels(&lp).unwrap(), vec![7, 1, 3]);
    }

    #[test]
    fn header_is_big_endian_with_spec_magic() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("imgs.idx");
        write_images(&ip, &[GrayImage::constant(2, 2, 0.0).unwrap()]).unwrap();
        let bytes = fs::read(&ip).unwrap();
        assert_eq!(&bytes[..4], &[0x00, 0x00, 0x08, 0x03]);
        assert_eq!(&bytes[4..8], &[0, 0, 0, 1]);
        assert_eq!(&bytes[8..12], &[0, 0, 0, 2]);
    }

    #[test]
    fn bad_magic_and_truncation_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.idx");
        fs::write(&p, [0u8, 0, 8, 1, 0, 0, 0, 1, 9]).unwrap();
        assert!(read_images(&p).is_err());
        fs::write(&p, [0u8, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2]).unwrap();
        assert!(read_images(&p).is_err());
    }
}
