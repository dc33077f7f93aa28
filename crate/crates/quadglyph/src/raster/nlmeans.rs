//! Non-local means smoothing.

use super::GrayImage;
use crate::error::{Error, Result};

/// Non-local means denoising.
///
/// Each output pixel is the similarity-weighted average of the pixels inside
/// its search window; the weight of a neighbor is
/// `exp(-max(d2 - 2*sigma^2, 0) / strength^2)` where `d2` is the mean squared
/// difference between the two patches centered on the pixels. `sigma` is fixed
/// at 0 here, matching a noise-free distance estimate.
///
/// Patches reaching past the border are evaluated with replicate padding.
pub fn nl_means(
    img: &GrayImage,
    patch_radius: usize,
    search_radius: usize,
    strength: f64,
) -> Result<GrayImage> {
    if patch_radius < 1 {
        return Err(Error::InvalidInput("patch_radius must be >= 1".into()));
    }
    if search_radius < patch_radius {
        return Err(Error::InvalidInput(
            "search_radius must be >= patch_radius".into(),
        ));
    }
    if strength <= 0.0 {
        return Err(Error::InvalidInput("strength must be positive".into()));
    }
    let side = 2 * patch_radius + 1;
    if img.width() < side || img.height() < side {
        return Err(Error::InvalidInput(format!(
            "image {}x{} smaller than patch side {}",
            img.width(),
            img.height(),
            side
        )));
    }

    let w = img.width();
    let h = img.height();
    let pr = patch_radius as isize;
    let sr = search_radius as isize;
    let patch_len = (side * side) as f64;
    let inv_h2 = 1.0 / (strength * strength);

    // Replicate-padded buffer; the margin covers search + patch reach.
    let margin = (search_radius + patch_radius) as isize;
    let pw = w + 2 * margin as usize;
    let ph = h + 2 * margin as usize;
    let mut padded = vec![0.0f64; pw * ph];
    for py in 0..ph as isize {
        let sy = (py - margin).clamp(0, h as isize - 1) as usize;
        for px in 0..pw as isize {
            let sx = (px - margin).clamp(0, w as isize - 1) as usize;
            padded[py as usize * pw + px as usize] = img.get(sx, sy);
        }
    }
    let at = |x: isize, y: isize| padded[(y + margin) as usize * pw + (x + margin) as usize];

    // One pass per window offset. The patch distance decomposes into per-
    // column sums of squared differences; every sum is accumulated fresh so
    // the arithmetic order does not depend on the scan position.
    let mut weight_sum = vec![0.0f64; w * h];
    let mut value_sum = vec![0.0f64; w * h];
    let span = side;
    let mut col = vec![0.0f64; w + side - 1];
    for oy in -sr..=sr {
        for ox in -sr..=sr {
            for y in 0..h as isize {
                for (c, slot) in col.iter_mut().enumerate() {
                    let x = c as isize - pr;
                    let mut s = 0.0;
                    for dy in -pr..=pr {
                        let d = at(x, y + dy) - at(x + ox, y + oy + dy);
                        s += d * d;
                    }
                    *slot = s;
                }
                for x in 0..w {
                    let mut d2 = 0.0;
                    for u in 0..span {
                        d2 += col[x + u];
                    }
                    let weight = (-(d2 / patch_len) * inv_h2).exp();
                    let idx = y as usize * w + x;
                    weight_sum[idx] += weight;
                    value_sum[idx] += weight * at(x as isize + ox, y + oy);
                }
            }
        }
    }

    let out: Vec<f64> = value_sum
        .iter()
        .zip(&weight_sum)
        .map(|(v, wgt)| v / wgt)
        .collect();
    Ok(GrayImage::from_raw_clamped(img.width(), img.height(), out))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent brute-force weighted average over the search window.
    fn nl_means_oracle(img: &GrayImage, pr: isize, sr: isize, h: f64) -> Vec<f64> {
        let w = img.width() as isize;
        let hh = img.height() as isize;
        let get =
            |x: isize, y: isize| img.get(x.clamp(0, w - 1) as usize, y.clamp(0, hh - 1) as usize);
        let mut out = Vec::new();
        for y in 0..hh {
            for x in 0..w {
                let mut ws = 0.0;
                let mut vs = 0.0;
                for ny in (y - sr)..=(y + sr) {
                    for nx in (x - sr)..=(x + sr) {
                        let mut d2 = 0.0;
                        let mut n = 0.0;
                        for dy in -pr..=pr {
                            for dx in -pr..=pr {
                                let d = get(x + dx, y + dy) - get(nx + dx, ny + dy);
                                d2 += d * d;
                                n += 1.0;
                            }
                        }
                        let wgt = (-(d2 / n) / (h * h)).exp();
                        ws += wgt;
                        vs += wgt * get(nx, ny);
                    }
                }
                out.push(vs / ws);
            }
        }
        out
    }

    #[test]
    fn constant_image_is_fixed_point() {
        let img = GrayImage::constant(16, 16, 0.5).unwrap();
        let out = nl_means(&img, 3, 5, 0.1).unwrap();
        for (&a, &b) in out.as_slice().iter().zip(img.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_attenuated_and_matches_oracle() {
        let mut data = vec![0.0; 11 * 11];
        data[5 * 11 + 5] = 1.0;
        let img = GrayImage::new(11, 11, data).unwrap();
        let out = nl_means(&img, 1, 3, 1.0).unwrap();
        assert!(out.get(5, 5) < 0.5, "impulse not attenuated: {}", out.get(5, 5));

        let expect = nl_means_oracle(&img, 1, 3, 1.0);
        for (a, b) in out.as_slice().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn random_image_matches_oracle() {
        let img = GrayImage::from_fn(12, 9, |x, y| {
            (((x * 31 + y * 17) % 13) as f64 / 13.0 + ((x * 7 + y * 3) % 5) as f64 / 10.0) / 1.5
        })
        .unwrap();
        let out = nl_means(&img, 2, 4, 0.2).unwrap();
        let expect = nl_means_oracle(&img, 2, 4, 0.2);
        for (a, b) in out.as_slice().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_degenerate_parameters() {
        let img = GrayImage::constant(8, 8, 0.2).unwrap();
        assert!(nl_means(&img, 1, 0, 0.1).is_err());
        assert!(nl_means(&img, 0, 3, 0.1).is_err());
        assert!(nl_means(&img, 1, 2, 0.0).is_err());
        let tiny = GrayImage::constant(4, 4, 0.2).unwrap();
        assert!(nl_means(&tiny, 3, 4, 0.1).is_err());
    }
}
