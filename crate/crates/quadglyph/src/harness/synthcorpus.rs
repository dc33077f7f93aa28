//! Procedural handwritten-style digit corpus.
//!
//! Ten digit classes, each with two allographs (writing variants), rendered
//! as anti-aliased strokes under seeded affine jitter, smooth elastic
//! warping, per-stroke wobble, and stroke-width/ink variation. Entirely
//! self-contained, so demos, tests and the acceptance protocol run without
//! any bundled dataset, and deterministic: the same seed always yields the
//! same corpus.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::Result;
use crate::raster::GrayImage;
use crate::seeding::derive_index_seed;

type Point = (f64, f64);

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64, steps: usize) -> Vec<Point> {
    (0..=steps)
        .map(|i| {
            let t = from_deg + (to_deg - from_deg) * i as f64 / steps as f64;
            let rad = t.to_radians();
            (cx + rx * rad.cos(), cy + ry * rad.sin())
        })
        .collect()
}

/// Stroke skeletons per digit and allograph on the unit canvas (y down).
fn digit_strokes(class: usize, variant: usize) -> Vec<Vec<Point>> {
    match (class, variant) {
        (0, 0) => vec![arc(0.5, 0.5, 0.26, 0.36, 0.0, 360.0, 18)],
        (0, _) => vec![arc(0.5, 0.5, 0.32, 0.33, 0.0, 360.0, 18)],
        (1, 0) => vec![
            vec![(0.36, 0.28), (0.54, 0.13)],
            vec![(0.54, 0.13), (0.54, 0.87)],
        ],
        (1, _) => vec![
            vec![(0.38, 0.30), (0.56, 0.12)],
            vec![(0.56, 0.12), (0.56, 0.86)],
            vec![(0.36, 0.86), (0.74, 0.86)],
        ],
        (2, 0) => vec![
            arc(0.5, 0.32, 0.24, 0.2, 180.0, 360.0, 10),
            vec![(0.74, 0.32), (0.28, 0.86)],
            vec![(0.28, 0.86), (0.76, 0.86)],
        ],
        (2, _) => vec![
            arc(0.5, 0.3, 0.22, 0.18, 170.0, 380.0, 10),
            vec![(0.7, 0.38), (0.3, 0.78)],
            arc(0.42, 0.82, 0.12, 0.07, 180.0, 300.0, 5),
            vec![(0.36, 0.84), (0.78, 0.82)],
        ],
        (3, 0) => vec![
            arc(0.47, 0.3, 0.23, 0.18, 150.0, 395.0, 12),
            arc(0.47, 0.68, 0.25, 0.2, 325.0, 575.0, 12),
        ],
        (3, _) => vec![
            vec![(0.3, 0.14), (0.72, 0.14)],
            vec![(0.72, 0.14), (0.48, 0.44)],
            arc(0.48, 0.66, 0.25, 0.22, 280.0, 560.0, 12),
        ],
        (4, 0) => vec![
            vec![(0.6, 0.12), (0.24, 0.62)],
            vec![(0.24, 0.62), (0.8, 0.62)],
            vec![(0.62, 0.34), (0.62, 0.9)],
        ],
        (4, _) => vec![
            vec![(0.42, 0.12), (0.3, 0.56)],
            vec![(0.3, 0.56), (0.76, 0.56)],
            vec![(0.66, 0.12), (0.66, 0.9)],
        ],
        (5, 0) => vec![
            vec![(0.72, 0.13), (0.32, 0.13)],
            vec![(0.32, 0.13), (0.3, 0.45)],
            arc(0.48, 0.64, 0.24, 0.22, 250.0, 480.0, 12),
        ],
        (5, _) => vec![
            vec![(0.76, 0.14), (0.34, 0.14)],
            vec![(0.34, 0.14), (0.33, 0.4)],
            vec![(0.33, 0.4), (0.52, 0.38)],
            arc(0.5, 0.63, 0.26, 0.24, 290.0, 500.0, 12),
        ],
        (6, 0) => vec![
            arc(0.62, 0.34, 0.34, 0.42, 230.0, 330.0, 8),
            arc(0.49, 0.66, 0.2, 0.2, 0.0, 360.0, 14),
        ],
        (6, _) => vec![
            vec![(0.6, 0.12), (0.38, 0.5)],
            arc(0.5, 0.68, 0.19, 0.21, 0.0, 360.0, 14),
        ],
        (7, 0) => vec![
            vec![(0.26, 0.14), (0.76, 0.14)],
            vec![(0.76, 0.14), (0.42, 0.88)],
        ],
        (7, _) => vec![
            vec![(0.26, 0.16), (0.76, 0.14)],
            vec![(0.76, 0.14), (0.44, 0.88)],
            vec![(0.36, 0.5), (0.68, 0.5)],
        ],
        (8, 0) => vec![
            arc(0.5, 0.31, 0.18, 0.17, 0.0, 360.0, 14),
            arc(0.5, 0.67, 0.22, 0.2, 0.0, 360.0, 14),
        ],
        (8, _) => vec![
            arc(0.52, 0.3, 0.21, 0.16, 0.0, 360.0, 14),
            arc(0.46, 0.66, 0.19, 0.21, 0.0, 360.0, 14),
        ],
        (9, 0) => vec![
            arc(0.5, 0.34, 0.2, 0.2, 0.0, 360.0, 14),
            vec![(0.7, 0.36), (0.64, 0.88)],
        ],
        (9, _) => vec![
            arc(0.5, 0.32, 0.19, 0.19, 0.0, 360.0, 14),
            arc(0.52, 0.6, 0.18, 0.28, 350.0, 470.0, 8),
        ],
        _ => unreachable!("classes are 0..10"),
    }
}

fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    let (px, py) = p;
    let (ax, ay) = a;
    let (bx, by) = b;
    let dx = bx - ax;
    let dy = by - ay;
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let cx = ax + t * dx;
    let cy = ay + t * dy;
    ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
}

/// Renders one seeded digit sample.
pub fn render_digit(class: usize, size: usize, seed: u64) -> GrayImage {
    let mut rng = StdRng::seed_from_u64(seed);

    let variant = rng.gen_range(0..2usize);
    let rotation = rng.gen_range(-0.36..0.36f64);
    let scale_x = rng.gen_range(0.66..1.14f64);
    let scale_y = rng.gen_range(0.66..1.14f64);
    let shear = rng.gen_range(-0.38..0.38f64);
    let tx = rng.gen_range(-0.08..0.08f64);
    let ty = rng.gen_range(-0.08..0.08f64);
    let half_width = rng.gen_range(0.022..0.055f64);
    let ink = rng.gen_range(0.62..1.0f64);

    // Smooth elastic warp: low-frequency sinusoidal displacement field.
    let warp_ax = rng.gen_range(0.0..0.055f64);
    let warp_ay = rng.gen_range(0.0..0.055f64);
    let warp_fx = rng.gen_range(0.8..1.8f64);
    let warp_fy = rng.gen_range(0.8..1.8f64);
    let warp_px = rng.gen_range(0.0..std::f64::consts::TAU);
    let warp_py = rng.gen_range(0.0..std::f64::consts::TAU);

    let (sin, cos) = rotation.sin_cos();
    let transform = |(x, y): Point| -> Point {
        let (x, y) = (x - 0.5, y - 0.5);
        let (x, y) = (x + shear * y, y);
        let (x, y) = (x * scale_x, y * scale_y);
        let (x, y) = (x * cos - y * sin, x * sin + y * cos);
        let (x, y) = (x + 0.5 + tx, y + 0.5 + ty);
        (
            x + warp_ax * (std::f64::consts::TAU * (warp_fx * y + warp_px)).sin(),
            y + warp_ay * (std::f64::consts::TAU * (warp_fy * x + warp_py)).sin(),
        )
    };

    // Correlated wobble per stroke plus independent point jitter gives the
    // strokes a hand-drawn unsteadiness without breaking their topology.
    let mut segments: Vec<(Point, Point)> = Vec::new();
    for stroke in digit_strokes(class, variant) {
        let wobble_amp = rng.gen_range(0.0..0.03f64);
        let wobble_phase = rng.gen_range(0.0..std::f64::consts::TAU);
        let wobble_freq = rng.gen_range(1.5..3.5f64);
        // Occasional under-drawn stroke ends, like a lifted pen.
        let trim_head = if rng.gen_range(0..4usize) == 0 {
            rng.gen_range(0.0..0.15f64)
        } else {
            0.0
        };
        let trim_tail = if rng.gen_range(0..4usize) == 0 {
            rng.gen_range(0.0..0.15f64)
        } else {
            0.0
        };
        let n = stroke.len().max(2) as f64;
        let jittered: Vec<Point> = stroke
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let q = transform(p);
                let s = i as f64 / (n - 1.0);
                let w = wobble_amp * (wobble_freq * std::f64::consts::TAU * s + wobble_phase).sin();
                (
                    q.0 + w + rng.gen_range(-0.016..0.016),
                    q.1 - w + rng.gen_range(-0.016..0.016),
                )
            })
            .collect();
        let segs: Vec<(Point, Point)> = jittered.windows(2).map(|p| (p[0], p[1])).collect();
        let total = segs.len() as f64;
        for (i, (a, b)) in segs.into_iter().enumerate() {
            let s0 = i as f64 / total;
            let s1 = (i as f64 + 1.0) / total;
            if s1 <= trim_head || s0 >= 1.0 - trim_tail {
                continue;
            }
            segments.push((a, b));
        }
    }
    if segments.is_empty() {
        segments.push(((0.4, 0.5), (0.6, 0.5)));
    }

    let aa = 0.75 / size as f64;
    GrayImage::from_fn(size, size, |x, y| {
        let p = (
            (x as f64 + 0.5) / size as f64,
            (y as f64 + 0.5) / size as f64,
        );
        let d = segments
            .iter()
            .map(|&(a, b)| dist_to_segment(p, a, b))
            .fold(f64::INFINITY, f64::min);
        let coverage = ((half_width - d) / aa + 0.5).clamp(0.0, 1.0);
        ink * coverage
    })
    .expect("rendered values stay in [0, 1]")
}

/// A balanced labeled corpus of `count` digit images (label = index mod 10).
pub fn generate_corpus(count: usize, size: usize, seed: u64) -> Result<(Vec<GrayImage>, Vec<u8>)> {
    let images: Vec<GrayImage> = (0..count)
        .into_par_iter()
        .map(|i| render_digit(i % 10, size, derive_index_seed(seed, i as u64)))
        .collect();
    let labels = (0..count).map(|i| (i % 10) as u8).collect();
    Ok((images, labels))
}
