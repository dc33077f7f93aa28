//! Otsu thresholding and binarization.

use super::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

const BINS: usize = 256;

fn histogram(img: &GrayImage) -> [u64; BINS] {
    let mut hist = [0u64; BINS];
    for &v in img.as_slice() {
        let bin = ((v * BINS as f64) as usize).min(BINS - 1);
        hist[bin] += 1;
    }
    hist
}

/// Between-class variance of splitting the histogram after bin `t`
/// (class 0 = bins `0..=t`, class 1 = the rest).
fn between_class_variance(hist: &[u64; BINS], t: usize) -> f64 {
    let total: u64 = hist.iter().sum();
    let mut n0 = 0u64;
    let mut sum0 = 0.0;
    let mut sum_all = 0.0;
    for (b, &c) in hist.iter().enumerate() {
        sum_all += b as f64 * c as f64;
        if b <= t {
            n0 += c;
            sum0 += b as f64 * c as f64;
        }
    }
    let n1 = total - n0;
    if n0 == 0 || n1 == 0 {
        return 0.0;
    }
    let w0 = n0 as f64 / total as f64;
    let w1 = n1 as f64 / total as f64;
    let mu0 = sum0 / n0 as f64;
    let mu1 = (sum_all - sum0) / n1 as f64;
    w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
}

/// Threshold maximizing the between-class variance over a 256-bin histogram.
///
/// Ties break toward the lowest threshold. The returned intensity is the upper
/// edge of the last class-0 bin, so `v <= t` selects class 0 for every value
/// that hashed into those bins. A constant image (single occupied bin) returns
/// that bin's lower edge, and binarizing with it yields a single class.
pub fn otsu_threshold(img: &GrayImage) -> Result<f64> {
    if img.is_empty() {
        return Err(Error::InvalidInput("otsu on empty image".into()));
    }
    let hist = histogram(img);
    let occupied: Vec<usize> = (0..BINS).filter(|&b| hist[b] > 0).collect();
    if occupied.len() == 1 {
        return Ok(occupied[0] as f64 / BINS as f64);
    }

    let mut best_t = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for t in 0..BINS {
        let v = between_class_variance(&hist, t);
        if v > best_v {
            best_v = v;
            best_t = t;
        }
    }
    Ok((best_t + 1) as f64 / BINS as f64)
}

/// Thresholds a gray image to the `{0, 255}` alphabet.
///
/// With `foreground_is_dark`, intensities `<= t` become foreground (255);
/// otherwise intensities `> t` do.
pub fn binarize(img: &GrayImage, t: f64, foreground_is_dark: bool) -> Result<BinaryImage> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("threshold {t} outside [0, 1]")));
    }
    let data = img
        .as_slice()
        .iter()
        .map(|&v| {
            let dark_side = v <= t;
            if dark_side == foreground_is_dark {
                255
            } else {
                0
            }
        })
        .collect();
    BinaryImage::new(img.width(), img.height(), data)
}
