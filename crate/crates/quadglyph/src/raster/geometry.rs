//! Component-centered square cropping/padding.

use super::{connected_components, BinaryImage, GrayImage};
use crate::error::{Error, Result};

/// Centers the largest foreground component on a square background canvas.
///
/// The canvas side is `max(bbox_w, bbox_h) + 2 * border`, so the component's
/// bounding box sits `border` pixels from the nearest edges and any excess
/// background in the source is cropped away. When exact centering is
/// impossible the box lands one pixel toward the top-left. Source pixels that
/// fall outside the canvas after translation are dropped; uncovered canvas is
/// background (0.0).
pub fn center_pad_square(img: &GrayImage, bin: &BinaryImage, border: usize) -> Result<GrayImage> {
    if img.width() != bin.width() || img.height() != bin.height() {
        return Err(Error::InvalidInput(format!(
            "gray {}x{} and binary {}x{} dimensions differ",
            img.width(),
            img.height(),
            bin.width(),
            bin.height()
        )));
    }
    let labeling = connected_components(bin);
    let largest = labeling
        .largest_id
        .ok_or_else(|| Error::InvalidInput("no foreground component to center".into()))?;
    let (x0, y0, x1, y1) = labeling
        .bounding_box(largest, bin.width())
        .expect("largest component has a bounding box");

    let bw = x1 - x0 + 1;
    let bh = y1 - y0 + 1;
    let side = bw.max(bh) + 2 * border;

    // Offset of the bounding box inside the canvas; integer halving puts any
    // odd spare pixel on the right/bottom, i.e. the box shifts top-left.
    let off_x = (side - bw) / 2;
    let off_y = (side - bh) / 2;
    let tx = off_x as isize - x0 as isize;
    let ty = off_y as isize - y0 as isize;

    let mut out = vec![0.0f64; side * side];
    for sy in 0..img.height() {
        let dy = sy as isize + ty;
        if dy < 0 || dy >= side as isize {
            continue;
        }
        for sx in 0..img.width() {
            let dx = sx as isize + tx;
            if dx < 0 || dx >= side as isize {
                continue;
            }
            out[dy as usize * side + dx as usize] = img.get(sx, sy);
        }
    }
    GrayImage::new(side, side, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::binarize;
    use proptest::prelude::*;

    fn blob_image(w: usize, h: usize, rect: (usize, usize, usize, usize)) -> (GrayImage, BinaryImage) {
        let (rx0, ry0, rx1, ry1) = rect;
        let gray = GrayImage::from_fn(w, h, |x, y| {
            if x >= rx0 && x <= rx1 && y >= ry0 && y <= ry1 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let bin = binarize(&gray, 0.5, false).unwrap();
        (gray, bin)
    }

    /// Bounding-box arithmetic oracle: expected side and expected border gaps.
    #[test]
    fn small_component_in_large_field() {
        let (gray, bin) = blob_image(100, 100, (40, 60, 44, 64));
        let out = center_pad_square(&gray, &bin, 10).unwrap();
        assert_eq!(out.width(), 25);
        assert_eq!(out.height(), 25);
        // Component occupies the centered 5x5 block.
        for y in 0..25 {
            for x in 0..25 {
                let inside = (10..15).contains(&x) && (10..15).contains(&y);
                assert_eq!(out.get(x, y), if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn already_centered_is_fixed_point() {
        let (gray, bin) = blob_image(25, 25, (10, 10, 14, 14));
        let out = center_pad_square(&gray, &bin, 10).unwrap();
        assert_eq!(out, gray);
    }

    #[test]
    fn edge_touching_component_gets_borders() {
        let (gray, bin) = blob_image(20, 20, (0, 0, 4, 6));
        let out = center_pad_square(&gray, &bin, 10).unwrap();
        assert_eq!(out.width(), 7 + 20);
        let lab = connected_components(&binarize(&out, 0.5, false).unwrap());
        let (x0, y0, x1, y1) = lab.bounding_box(lab.largest_id.unwrap(), out.width()).unwrap();
        assert!(x0 >= 10 && y0 >= 10);
        assert!(out.width() - 1 - x1 >= 10 && out.height() - 1 - y1 >= 10);
    }

    #[test]
    fn empty_foreground_rejected() {
        let gray = GrayImage::constant(8, 8, 0.0).unwrap();
        let bin = BinaryImage::new(8, 8, vec![0; 64]).unwrap();
        assert!(center_pad_square(&gray, &bin, 10).is_err());
    }

    proptest! {
        #[test]
        fn square_bordered_and_centered(
            x0 in 0usize..20, y0 in 0usize..20,
            w in 1usize..12, h in 1usize..12,
        ) {
            let (gray, bin) = blob_image(32, 32, (x0, y0, (x0 + w - 1).min(31), (y0 + h - 1).min(31)));
            let out = center_pad_square(&gray, &bin, 10).unwrap();
            prop_assert_eq!(out.width(), out.height());

            let obin = binarize(&out, 0.5, false).unwrap();
            let lab = connected_components(&obin);
            let (bx0, by0, bx1, by1) = lab.bounding_box(lab.largest_id.unwrap(), out.width()).unwrap();
            prop_assert!(bx0 >= 10 && by0 >= 10);
            prop_assert!(out.width() - 1 - bx1 >= 10);
            prop_assert!(out.height() - 1 - by1 >= 10);

            // Box center within one pixel of the canvas center (doubled to stay integral).
            let cx2 = (bx0 + bx1) as isize;
            let cy2 = (by0 + by1) as isize;
            let target2 = (out.width() - 1) as isize;
            prop_assert!((cx2 - target2).abs() <= 2, "cx2={cx2} target2={target2}");
            prop_assert!((cy2 - target2).abs() <= 2, "cy2={cy2} target2={target2}");
        }
    }
}
