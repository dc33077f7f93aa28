//! Deterministic noise synthesis: additive white Gaussian noise, reduced
//! contrast, and linear motion blur.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// The three supported noise families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, Hash)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Awgn,
    Contrast,
    Motion,
}

impl NoiseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NoiseKind::Awgn => "awgn",
            NoiseKind::Contrast => "contrast",
            NoiseKind::Motion => "motion",
        }
    }
}

/// How the `snr` field is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SnrScale {
    /// Decibels: noise variance = P / 10^(snr/10).
    #[default]
    Db,
    /// Plain power ratio: noise variance = P / snr.
    Linear,
}

/// Full description of one noise corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Signal-to-noise ratio for the Gaussian families.
    pub snr_db: f64,
    #[serde(default)]
    pub snr_scale: SnrScale,
    /// Intensity divisor for the contrast family.
    pub contrast_divisor: f64,
    /// Motion blur extent in pixels.
    pub blur_len: usize,
    /// Motion blur direction, degrees counterclockwise.
    pub blur_angle_deg: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// White Gaussian noise at 9.5 dB SNR.
    pub fn awgn(seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Awgn,
            snr_db: 9.5,
            snr_scale: SnrScale::Db,
            contrast_divisor: 1.0,
            blur_len: 1,
            blur_angle_deg: 0.0,
            seed,
        }
    }

    /// Intensity divided by 2, then Gaussian noise at 12 dB SNR.
    pub fn contrast(seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Contrast,
            snr_db: 12.0,
            snr_scale: SnrScale::Db,
            contrast_divisor: 2.0,
            blur_len: 1,
            blur_angle_deg: 0.0,
            seed,
        }
    }

    /// Linear motion of 5 pixels at 15 degrees counterclockwise.
    pub fn motion(seed: u64) -> Self {
        NoiseSpec {
            kind: NoiseKind::Motion,
            snr_db: f64::INFINITY,
            snr_scale: SnrScale::Db,
            contrast_divisor: 1.0,
            blur_len: 5,
            blur_angle_deg: 15.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.blur_len < 1 {
            return Err(Error::InvalidInput("blur_len must be >= 1".into()));
        }
        if self.contrast_divisor <= 0.0 {
            return Err(Error::InvalidInput(
                "contrast_divisor must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Square normalized point-spread function of a linear motion.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionKernel {
    size: usize,
    weights: Vec<f64>,
}

impl MotionKernel {
    pub fn identity() -> Self {
        MotionKernel {
            size: 1,
            weights: vec![1.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.weights[y * self.size + x]
    }
}

/// Rasterizes a length-`len` line segment through the kernel center at
/// `angle_deg` counterclockwise; each cell's weight is the exact length of
/// segment it contains, normalized to sum 1.
pub fn motion_kernel(len: usize, angle_deg: f64) -> Result<MotionKernel> {
    if len < 1 {
        return Err(Error::InvalidInput("kernel length must be >= 1".into()));
    }
    if len == 1 {
        return Ok(MotionKernel::identity());
    }
    let size = if len % 2 == 1 { len } else { len + 1 };
    let half = (size / 2) as isize;

    let theta = angle_deg.to_radians();
    // Counterclockwise in image coordinates (y grows downward).
    let dir = (theta.cos(), -theta.sin());
    let half_len = len as f64 / 2.0;
    let a = (-half_len * dir.0, -half_len * dir.1);
    let b = (half_len * dir.0, half_len * dir.1);

    // Crossing parameters against the grid lines x = k + 0.5, y = k + 0.5.
    let mut ts = vec![0.0, 1.0];
    let dx = b.0 - a.0;
    let dy = b.1 - a.1;
    for k in -half..half {
        let edge = k as f64 + 0.5;
        if dx.abs() > 1e-12 {
            let t = (edge - a.0) / dx;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
        if dy.abs() > 1e-12 {
            let t = (edge - a.1) / dy;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
        }
    }
    ts.sort_by(|p, q| p.partial_cmp(q).unwrap());

    let seg_len = len as f64;
    let mut weights = vec![0.0; size * size];
    for pair in ts.windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        if t1 - t0 <= 1e-15 {
            continue;
        }
        let tm = (t0 + t1) / 2.0;
        let px = a.0 + tm * dx;
        let py = a.1 + tm * dy;
        let cx = px.round() as isize;
        let cy = py.round() as isize;
        if cx.abs() > half || cy.abs() > half {
            continue;
        }
        let ix = (cx + half) as usize;
        let iy = (cy + half) as usize;
        weights[iy * size + ix] += (t1 - t0) * seg_len;
    }

    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(MotionKernel { size, weights })
}

/// 2-D correlation with replicate-edge padding. The kernel is expected to be
/// normalized; output is clamped into `[0, 1]`.
pub fn convolve(img: &GrayImage, kernel: &MotionKernel) -> Result<GrayImage> {
    if kernel.size > img.width() || kernel.size > img.height() {
        return Err(Error::InvalidInput(format!(
            "kernel {} larger than image {}x{}",
            kernel.size,
            img.width(),
            img.height()
        )));
    }
    let w = img.width() as isize;
    let h = img.height() as isize;
    let half = (kernel.size / 2) as isize;
    let mut out = Vec::with_capacity(img.len());
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..kernel.size as isize {
                for kx in 0..kernel.size as isize {
                    let sx = (x + kx - half).clamp(0, w - 1) as usize;
                    let sy = (y + ky - half).clamp(0, h - 1) as usize;
                    acc += kernel.get(kx as usize, ky as usize) * img.get(sx, sy);
                }
            }
            out.push(acc);
        }
    }
    Ok(GrayImage::from_raw_clamped(img.width(), img.height(), out))
}

/// Adds i.i.d. Gaussian noise calibrated so the noise variance is
/// `P_signal / ratio`, where `P_signal` is the mean squared intensity of the
/// input. `snr = +inf` is the no-noise sentinel. Output is clamped to `[0, 1]`.
pub fn add_awgn(img: &GrayImage, snr: f64, scale: SnrScale, seed: u64) -> Result<GrayImage> {
    if img.is_empty() {
        return Err(Error::InvalidInput("awgn on empty image".into()));
    }
    if snr.is_infinite() && snr > 0.0 {
        return Ok(img.clone());
    }
    let power = img.mean_square();
    if power == 0.0 {
        return Err(Error::InvalidInput(
            "awgn on an all-zero image: SNR is undefined".into(),
        ));
    }
    let ratio = match scale {
        SnrScale::Db => 10f64.powf(snr / 10.0),
        SnrScale::Linear => snr,
    };
    if ratio <= 0.0 {
        return Err(Error::InvalidInput(format!("non-positive SNR ratio {ratio}")));
    }
    let sigma = (power / ratio).sqrt();
    let mut rng = StdRng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    let data = img
        .as_slice()
        .iter()
        .map(|&v| v + normal.sample(&mut rng))
        .collect();
    Ok(GrayImage::from_raw_clamped(img.width(), img.height(), data))
}

/// Applies one noise family to an image.
///
/// Awgn adds calibrated Gaussian noise; Contrast divides intensities by
/// `contrast_divisor` and then adds Gaussian noise; Motion convolves with the
/// linear motion kernel.
pub fn apply_noise(img: &GrayImage, spec: &NoiseSpec) -> Result<GrayImage> {
    spec.validate()?;
    match spec.kind {
        NoiseKind::Awgn => add_awgn(img, spec.snr_db, spec.snr_scale, spec.seed),
        NoiseKind::Contrast => {
            let dimmed = img.scale(spec.contrast_divisor)?;
            add_awgn(&dimmed, spec.snr_db, spec.snr_scale, spec.seed)
        }
        NoiseKind::Motion => {
            let kernel = motion_kernel(spec.blur_len, spec.blur_angle_deg)?;
            convolve(img, &kernel)
        }
    }
}

/// Empirical SNR in dB of `noisy - clean` measured before clamping; test and
/// calibration helper.
pub fn empirical_snr_db(clean: &GrayImage, seed: u64, snr_db: f64) -> Result<f64> {
    let power = clean.mean_square();
    if power == 0.0 {
        return Err(Error::InvalidInput("zero-power image".into()));
    }
    let ratio = 10f64.powf(snr_db / 10.0);
    let sigma = (power / ratio).sqrt();
    let mut rng = StdRng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let noise_power = clean
        .as_slice()
        .iter()
        .map(|_| {
            let n: f64 = normal.sample(&mut rng);
            n * n
        })
        .sum::<f64>()
        / clean.len() as f64;
    Ok(10.0 * (power / noise_power).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn infinite_snr_is_identity() {
        let img = GrayImage::constant(4, 4, 0.5).unwrap();
        let out = add_awgn(&img, f64::INFINITY, SnrScale::Db, 1).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn awgn_is_deterministic() {
        let img = GrayImage::from_fn(8, 8, |x, y| ((x * 13 + y * 7) % 10) as f64 / 10.0).unwrap();
        let a = add_awgn(&img, 9.5, SnrScale::Db, 42).unwrap();
        let b = add_awgn(&img, 9.5, SnrScale::Db, 42).unwrap();
        assert_eq!(a, b);
        let c = add_awgn(&img, 9.5, SnrScale::Db, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn awgn_rejects_zero_power() {
        let img = GrayImage::constant(4, 4, 0.0).unwrap();
        assert!(add_awgn(&img, 9.5, SnrScale::Db, 1).is_err());
    }

    /// Sample-statistics oracle: measured SNR within +-0.5 dB on a 64x64
    /// mid-gray image.
    #[test]
    fn empirical_snr_matches_spec() {
        let img = GrayImage::constant(64, 64, 0.5).unwrap();
        for seed in 0..5 {
            let measured = empirical_snr_db(&img, seed, 9.5).unwrap();
            assert!(
                (measured - 9.5).abs() < 0.5,
                "seed {seed}: measured {measured} dB"
            );
        }
    }

    #[test]
    fn kernel_len1_is_identity() {
        let k = motion_kernel(1, 137.0).unwrap();
        assert_eq!(k.size(), 1);
        assert_eq!(k.weights(), &[1.0]);
    }

    /// Line-coverage oracle: a horizontal 5-pixel motion covers five cells of
    /// the middle row with exactly one unit of length each.
    #[test]
    fn kernel_len5_horizontal_is_five_fifths() {
        let k = motion_kernel(5, 0.0).unwrap();
        assert_eq!(k.size(), 5);
        for y in 0..5 {
            for x in 0..5 {
                let expect = if y == 2 { 0.2 } else { 0.0 };
                assert!(
                    (k.get(x, y) - expect).abs() < 1e-9,
                    "kernel[{x},{y}] = {}",
                    k.get(x, y)
                );
            }
        }
    }

    #[test]
    fn kernel_90_degrees_is_transpose_of_0() {
        let h = motion_kernel(5, 0.0).unwrap();
        let v = motion_kernel(5, 90.0).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                assert!((h.get(x, y) - v.get(y, x)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn convolve_identity_and_constant() {
        let img = GrayImage::from_fn(6, 6, |x, y| ((x + 2 * y) % 7) as f64 / 7.0).unwrap();
        let out = convolve(&img, &MotionKernel::identity()).unwrap();
        assert_eq!(out, img);

        let constant = GrayImage::constant(8, 8, 0.42).unwrap();
        let k = motion_kernel(5, 33.0).unwrap();
        let blurred = convolve(&constant, &k).unwrap();
        for &v in blurred.as_slice() {
            assert!((v - 0.42).abs() < 1e-12);
        }
    }

    /// Naive double-loop convolution oracle.
    #[test]
    fn convolve_matches_naive_reference() {
        let img = GrayImage::from_fn(8, 8, |x, y| ((x * 31 + y * 17) % 11) as f64 / 11.0).unwrap();
        let k = motion_kernel(3, 40.0).unwrap();
        let out = convolve(&img, &k).unwrap();

        let half = (k.size() / 2) as isize;
        for y in 0..8isize {
            for x in 0..8isize {
                let mut acc = 0.0;
                for ky in 0..k.size() as isize {
                    for kx in 0..k.size() as isize {
                        let sx = (x + kx - half).clamp(0, 7) as usize;
                        let sy = (y + ky - half).clamp(0, 7) as usize;
                        acc += k.get(kx as usize, ky as usize) * img.get(sx, sy);
                    }
                }
                assert!((out.get(x as usize, y as usize) - acc.clamp(0.0, 1.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn motion_on_constant_is_unchanged() {
        let img = GrayImage::constant(10, 10, 0.3).unwrap();
        let out = apply_noise(&img, &NoiseSpec::motion(5)).unwrap();
        for &v in out.as_slice() {
            assert!((v - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn contrast_halves_intensity_gap() {
        let img = GrayImage::from_fn(4, 1, |x, _| if x < 2 { 0.1 } else { 0.9 }).unwrap();
        let dimmed = img.scale(2.0).unwrap();
        let gap_in = 0.9 - 0.1;
        let gap_out = dimmed.get(3, 0) - dimmed.get(0, 0);
        assert!((gap_out - gap_in / 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn kernel_sums_to_one_and_is_180_symmetric(
            len in 1usize..9,
            angle in 0.0f64..180.0,
        ) {
            let k = motion_kernel(len, angle).unwrap();
            let sum: f64 = k.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);

            let flipped = motion_kernel(len, angle + 180.0).unwrap();
            for (a, b) in k.weights().iter().zip(flipped.weights()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn apply_noise_is_pure(seed in any::<u64>()) {
            let img = GrayImage::from_fn(8, 8, |x, y| ((x + y) % 4) as f64 / 4.0 + 0.1).unwrap();
            let spec = NoiseSpec { seed, ..NoiseSpec::awgn(0) };
            let a = apply_noise(&img, &spec).unwrap();
            let b = apply_noise(&img, &spec).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
