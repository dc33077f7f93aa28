//! Nearest-neighbor and bilinear resampling.

use super::{BinaryImage, GrayImage};
use crate::error::{Error, Result};

fn check_dims(out_w: usize, out_h: usize) -> Result<()> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidInput("output dimensions must be >= 1".into()));
    }
    Ok(())
}

/// Nearest-neighbor resize; output stays in the `{0, 255}` alphabet.
///
/// Destination pixel centers are mapped through the half-open source grid:
/// `src = floor((dst + 0.5) * src_dim / dst_dim)`.
pub fn resample_nearest(img: &BinaryImage, out_w: usize, out_h: usize) -> Result<BinaryImage> {
    check_dims(out_w, out_h)?;
    let sx = img.width() as f64 / out_w as f64;
    let sy = img.height() as f64 / out_h as f64;
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let src_y = (((y as f64 + 0.5) * sy) as usize).min(img.height() - 1);
        for x in 0..out_w {
            let src_x = (((x as f64 + 0.5) * sx) as usize).min(img.width() - 1);
            data.push(img.get(src_x, src_y));
        }
    }
    BinaryImage::new(out_w, out_h, data)
}

/// Bilinear resize with edge clamping.
pub fn resample_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    check_dims(out_w, out_h)?;
    let sx = img.width() as f64 / out_w as f64;
    let sy = img.height() as f64 / out_h as f64;
    let max_x = img.width() - 1;
    let max_y = img.height() - 1;
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(max_y);
        let wy = fy - y0 as f64;
        for x in 0..out_w {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(max_x);
            let wx = fx - x0 as f64;
            let top = img.get(x0, y0) * (1.0 - wx) + img.get(x1, y0) * wx;
            let bot = img.get(x0, y1) * (1.0 - wx) + img.get(x1, y1) * wx;
            data.push(top * (1.0 - wy) + bot * wy);
        }
    }
    Ok(GrayImage::from_raw_clamped(out_w, out_h, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nearest_identity() {
        let img = BinaryImage::new(3, 2, vec![0, 255, 0, 255, 0, 255]).unwrap();
        assert_eq!(resample_nearest(&img, 3, 2).unwrap(), img);
    }

    #[test]
    fn nearest_doubles_checkerboard_into_blocks() {
        let img = BinaryImage::new(2, 2, vec![255, 0, 0, 255]).unwrap();
        let out = resample_nearest(&img, 4, 4).unwrap();
        // Coordinate-mapping oracle: src = floor((dst + 0.5) / 2).
        for y in 0..4 {
            for x in 0..4 {
                let expect = img.get(
                    (((x as f64 + 0.5) * 0.5) as usize).min(1),
                    (((y as f64 + 0.5) * 0.5) as usize).min(1),
                );
                assert_eq!(out.get(x, y), expect);
            }
        }
        assert_eq!(
            out.as_slice(),
            &[255, 255, 0, 0, 255, 255, 0, 0, 0, 0, 255, 255, 0, 0, 255, 255]
        );
    }

    #[test]
    fn bilinear_identity_and_midpoint() {
        let img = GrayImage::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(resample_bilinear(&img, 2, 1).unwrap(), img);
        let out = resample_bilinear(&img, 3, 1).unwrap();
        assert!((out.get(1, 0) - 0.5).abs() < 1e-12);
        assert_eq!(out.get(0, 0), 0.0);
        assert_eq!(out.get(2, 0), 1.0);
    }

    #[test]
    fn zero_output_dims_rejected() {
        let img = GrayImage::constant(2, 2, 0.5).unwrap();
        assert!(resample_bilinear(&img, 0, 2).is_err());
    }

    proptest! {
        #[test]
        fn nearest_preserves_alphabet(
            bits in proptest::collection::vec(any::<bool>(), 36),
            ow in 1usize..12,
            oh in 1usize..12,
        ) {
            let data: Vec<u8> = bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
            let img = BinaryImage::new(6, 6, data).unwrap();
            let out = resample_nearest(&img, ow, oh).unwrap();
            prop_assert!(out.as_slice().iter().all(|&v| v == 0 || v == 255));
        }

        #[test]
        fn bilinear_constant_stays_constant(
            v in 0.0f64..=1.0,
            ow in 1usize..10,
            oh in 1usize..10,
        ) {
            let img = GrayImage::constant(4, 4, v).unwrap();
            let out = resample_bilinear(&img, ow, oh).unwrap();
            for &o in out.as_slice() {
                prop_assert!((o - v).abs() < 1e-12);
            }
        }
    }
}
