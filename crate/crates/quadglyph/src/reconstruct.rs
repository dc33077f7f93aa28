//! Character reconstruction: per-pixel binary classification over hypercolumn
//! features.
//!
//! A [`ResponseMapSource`] supplies K response maps per image, rescaled to the
//! image's own size. Stacking the raw intensity with the K map values at one
//! pixel yields that pixel's hypercolumn; a DBN trained on sampled pixel
//! hypercolumns classifies every pixel as character or background, and the
//! classified pixels form the reconstructed binary image.

use std::path::PathBuf;

use ndarray::Array2;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dbn::{dbn_finetune, dbn_predict, dbn_pretrain, DbnModel, LabeledBatch, TrainConfig};
use crate::error::{Error, Result};
use crate::raster::{io::read_pgm, resample_bilinear, BinaryImage, GrayImage};
use crate::seeding::{derive_index_seed, derive_seed};

/// Supplier of per-image response maps, the stand-in contract for a
/// pretrained convolutional feature extractor.
pub trait ResponseMapSource: Sync {
    /// K response maps at the image's own resolution.
    fn response_maps(&self, id: &str, img: &GrayImage) -> Result<Vec<Array2<f64>>>;

    /// Number of maps per image; constant across images.
    fn map_count(&self) -> usize;

    /// Inclusive `(lo, hi)` output bounds per map, used to normalize
    /// hypercolumns into the unit interval for the DBN.
    fn map_ranges(&self) -> Vec<(f64, f64)>;

    fn name(&self) -> String;
}

// ---------------------------------------------------------------------------
// Filter bank source

struct ScaleKernels {
    smooth: Vec<f64>,
    deriv: Vec<f64>,
    second: Vec<f64>,
}

/// Deterministic multi-scale filter bank: Gaussian smooth, x/y derivatives of
/// Gaussian, and Laplacian of Gaussian per scale (K = 4 x scales).
pub struct FilterBankSource {
    scales: Vec<f64>,
    kernels: Vec<ScaleKernels>,
}

impl FilterBankSource {
    pub fn new(scales: &[f64]) -> Result<FilterBankSource> {
        if scales.is_empty() {
            return Err(Error::InvalidInput("filter bank needs >= 1 scale".into()));
        }
        if scales.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidInput("scales must be positive".into()));
        }
        let kernels = scales.iter().map(|&s| Self::kernels_for(s)).collect();
        Ok(FilterBankSource {
            scales: scales.to_vec(),
            kernels,
        })
    }

    /// The pipeline default: scales {1, 2, 4}, K = 12.
    pub fn default_bank() -> FilterBankSource {
        Self::new(&[1.0, 2.0, 4.0]).expect("valid default scales")
    }

    fn kernels_for(sigma: f64) -> ScaleKernels {
        let radius = (3.0 * sigma).ceil() as isize;
        let len = (2 * radius + 1) as usize;
        let mut smooth = Vec::with_capacity(len);
        for i in -radius..=radius {
            let x = i as f64;
            smooth.push((-x * x / (2.0 * sigma * sigma)).exp());
        }
        let sum: f64 = smooth.iter().sum();
        for v in &mut smooth {
            *v /= sum;
        }
        // Analytic derivatives of the normalized sampled Gaussian, corrected
        // to zero DC so constant inputs produce exactly zero response.
        let mut deriv = Vec::with_capacity(len);
        let mut second = Vec::with_capacity(len);
        for (idx, &g) in smooth.iter().enumerate() {
            let x = (idx as isize - radius) as f64;
            deriv.push(-x / (sigma * sigma) * g);
            second.push((x * x - sigma * sigma) / sigma.powi(4) * g);
        }
        let dc = deriv.iter().sum::<f64>() / len as f64;
        for v in &mut deriv {
            *v -= dc;
        }
        let dc2 = second.iter().sum::<f64>() / len as f64;
        for v in &mut second {
            *v -= dc2;
        }
        ScaleKernels {
            smooth,
            deriv,
            second,
        }
    }
}

/// Separable convolution with replicate-edge padding: horizontal kernel `kx`
/// then vertical kernel `ky`.
fn convolve_separable(img: &Array2<f64>, kx: &[f64], ky: &[f64]) -> Array2<f64> {
    let (h, w) = img.dim();
    let rx = (kx.len() / 2) as isize;
    let ry = (ky.len() / 2) as isize;

    let mut horiz = Array2::zeros((h, w));
    for y in 0..h {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for (i, &k) in kx.iter().enumerate() {
                let sx = (x + i as isize - rx).clamp(0, w as isize - 1) as usize;
                acc += k * img[[y, sx]];
            }
            horiz[[y, x as usize]] = acc;
        }
    }
    let mut out = Array2::zeros((h, w));
    for y in 0..h as isize {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, &k) in ky.iter().enumerate() {
                let sy = (y + i as isize - ry).clamp(0, h as isize - 1) as usize;
                acc += k * horiz[[sy, x]];
            }
            out[[y as usize, x]] = acc;
        }
    }
    out
}

/// Exact response range of a separable kernel pair for inputs in `[0, 1]`.
fn separable_range(kx: &[f64], ky: &[f64]) -> (f64, f64) {
    let (pxp, pxn): (f64, f64) = kx.iter().fold((0.0, 0.0), |(p, n), &v| {
        if v >= 0.0 {
            (p + v, n)
        } else {
            (p, n + v.abs())
        }
    });
    let (pyp, pyn): (f64, f64) = ky.iter().fold((0.0, 0.0), |(p, n), &v| {
        if v >= 0.0 {
            (p + v, n)
        } else {
            (p, n + v.abs())
        }
    });
    let pos = pxp * pyp + pxn * pyn;
    let neg = pxp * pyn + pxn * pyp;
    (-neg, pos)
}

fn add_ranges(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

impl ResponseMapSource for FilterBankSource {
    fn response_maps(&self, _id: &str, img: &GrayImage) -> Result<Vec<Array2<f64>>> {
        let (h, w) = (img.height(), img.width());
        let raw = Array2::from_shape_fn((h, w), |(y, x)| img.get(x, y));
        let mut maps = Vec::with_capacity(self.map_count());
        for k in &self.kernels {
            maps.push(convolve_separable(&raw, &k.smooth, &k.smooth));
            maps.push(convolve_separable(&raw, &k.deriv, &k.smooth));
            maps.push(convolve_separable(&raw, &k.smooth, &k.deriv));
            let gxx = convolve_separable(&raw, &k.second, &k.smooth);
            let gyy = convolve_separable(&raw, &k.smooth, &k.second);
            maps.push(gxx + gyy);
        }
        Ok(maps)
    }

    fn map_count(&self) -> usize {
        4 * self.scales.len()
    }

    fn map_ranges(&self) -> Vec<(f64, f64)> {
        let mut ranges = Vec::with_capacity(self.map_count());
        for k in &self.kernels {
            ranges.push(separable_range(&k.smooth, &k.smooth));
            ranges.push(separable_range(&k.deriv, &k.smooth));
            ranges.push(separable_range(&k.smooth, &k.deriv));
            ranges.push(add_ranges(
                separable_range(&k.second, &k.smooth),
                separable_range(&k.smooth, &k.second),
            ));
        }
        ranges
    }

    fn name(&self) -> String {
        let scales: Vec<String> = self.scales.iter().map(|s| s.to_string()).collect();
        format!("filterbank[{}]", scales.join(","))
    }
}

// ---------------------------------------------------------------------------
// File-backed source

/// Loads externally exported response maps from `<dir>/<id>_<k>.pgm` and
/// rescales them bilinearly to the query image's size. Gives back exactly the
/// maps a pretrained network produced, when such an export exists.
pub struct FileSource {
    dir: PathBuf,
    k: usize,
}

impl FileSource {
    pub fn new(dir: impl Into<PathBuf>, k: usize) -> Result<FileSource> {
        if k == 0 {
            return Err(Error::InvalidInput("file source needs K >= 1".into()));
        }
        Ok(FileSource { dir: dir.into(), k })
    }
}

impl ResponseMapSource for FileSource {
    fn response_maps(&self, id: &str, img: &GrayImage) -> Result<Vec<Array2<f64>>> {
        let mut maps = Vec::with_capacity(self.k);
        for m in 0..self.k {
            let path = self.dir.join(format!("{id}_{m}.pgm"));
            if !path.exists() {
                return Err(Error::Data(format!(
                    "missing response map {m} for image '{id}' at {}",
                    path.display()
                )));
            }
            let map = read_pgm(&path)?;
            let map = if map.width() == img.width() && map.height() == img.height() {
                map
            } else {
                resample_bilinear(&map, img.width(), img.height())?
            };
            maps.push(Array2::from_shape_fn(
                (img.height(), img.width()),
                |(y, x)| map.get(x, y),
            ));
        }
        Ok(maps)
    }

    fn map_count(&self) -> usize {
        self.k
    }

    fn map_ranges(&self) -> Vec<(f64, f64)> {
        vec![(0.0, 1.0); self.k]
    }

    fn name(&self) -> String {
        format!("files[{}]", self.dir.display())
    }
}

// ---------------------------------------------------------------------------
// Hypercolumns

/// Per-pixel hypercolumns of one image: row `y * width + x` holds
/// `[intensity, map_1(x, y), ..., map_K(x, y)]`.
pub struct HypercolumnGrid {
    pub width: usize,
    pub height: usize,
    pub features: Array2<f64>,
}

/// `(lo, hi)` bounds per hypercolumn element: the raw intensity plus the
/// source's map ranges.
pub fn hypercolumn_ranges(src: &dyn ResponseMapSource) -> Vec<(f64, f64)> {
    let mut ranges = Vec::with_capacity(src.map_count() + 1);
    ranges.push((0.0, 1.0));
    ranges.extend(src.map_ranges());
    ranges
}

/// Affine map of raw hypercolumn columns into `[0, 1]` using the bounds.
pub fn normalize_features(features: &Array2<f64>, ranges: &[(f64, f64)]) -> Array2<f64> {
    let mut out = features.clone();
    for (c, &(lo, hi)) in ranges.iter().enumerate() {
        let span = hi - lo;
        let mut col = out.column_mut(c);
        if span <= f64::EPSILON {
            col.fill(0.5);
        } else {
            col.mapv_inplace(|v| ((v - lo) / span).clamp(0.0, 1.0));
        }
    }
    out
}

/// Stacks raw intensity and response-map values for every pixel.
pub fn extract_hypercolumns(
    img: &GrayImage,
    src: &dyn ResponseMapSource,
    id: &str,
) -> Result<HypercolumnGrid> {
    let maps = src.response_maps(id, img)?;
    if maps.len() != src.map_count() {
        return Err(Error::Data(format!(
            "source '{}' returned {} maps, promised {}",
            src.name(),
            maps.len(),
            src.map_count()
        )));
    }
    let (w, h) = (img.width(), img.height());
    for (m, map) in maps.iter().enumerate() {
        if map.dim() != (h, w) {
            return Err(Error::Data(format!("map {m} has wrong dimensions")));
        }
        if map.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("map {m} contains non-finite values")));
        }
    }
    let k1 = maps.len() + 1;
    let mut features = Array2::zeros((w * h, k1));
    for y in 0..h {
        for x in 0..w {
            let row = y * w + x;
            features[[row, 0]] = img.get(x, y);
            for (m, map) in maps.iter().enumerate() {
                features[[row, m + 1]] = map[[y, x]];
            }
        }
    }
    Ok(HypercolumnGrid {
        width: w,
        height: h,
        features,
    })
}

// ---------------------------------------------------------------------------
// Pixel pools

/// How many images and pixels feed the CRN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrnSamplingPlan {
    /// Images sampled per noisy corpus.
    pub per_noisy_images: usize,
    /// Images sampled from the clean corpus.
    pub clean_images: usize,
    /// Pixel budget per sampled image (clipped to the image size).
    pub pixels_per_image: usize,
    pub seed: u64,
}

impl Default for CrnSamplingPlan {
    fn default() -> Self {
        CrnSamplingPlan {
            per_noisy_images: 30,
            clean_images: 14,
            pixels_per_image: 2000,
            seed: 0,
        }
    }
}

impl CrnSamplingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.per_noisy_images == 0 || self.clean_images == 0 || self.pixels_per_image == 0 {
            return Err(Error::Config("sampling plan counts must be >= 1".into()));
        }
        Ok(())
    }
}

/// One corpus the pool may draw from.
pub struct PoolSource<'a> {
    /// Corpus tag ("awgn", "clean", ...); also salts the sampling stream.
    pub tag: String,
    /// Clean corpora use the plan's `clean_images` count.
    pub is_clean: bool,
    /// `(image id, image, binarized ground truth)` triples.
    pub items: Vec<(String, &'a GrayImage, &'a BinaryImage)>,
}

/// One labeled pixel with its provenance.
#[derive(Debug, Clone)]
pub struct PixelSample {
    /// Raw hypercolumn.
    pub features: Vec<f64>,
    /// True when the ground-truth pixel is character (255).
    pub is_character: bool,
    /// `(image id, x, y)`.
    pub origin: (String, usize, usize),
}

pub struct PixelPool {
    pub samples: Vec<PixelSample>,
    /// Hypercolumn bounds copied from the source that built the pool.
    pub ranges: Vec<(f64, f64)>,
    pub background_count: usize,
    pub character_count: usize,
    pub warnings: Vec<String>,
}

/// Samples images per the plan and pixels uniformly without replacement per
/// image. The class balance is reported, not enforced.
pub fn build_pixel_pool(
    sources: &[PoolSource<'_>],
    src: &dyn ResponseMapSource,
    plan: &CrnSamplingPlan,
) -> Result<PixelPool> {
    plan.validate()?;
    if sources.is_empty() {
        return Err(Error::InvalidInput("pixel pool needs >= 1 source".into()));
    }

    let mut warnings = Vec::new();
    // (source index, item index) pairs chosen per plan, deterministic per tag.
    let mut picks: Vec<(usize, usize)> = Vec::new();
    for (si, source) in sources.iter().enumerate() {
        let want = if source.is_clean {
            plan.clean_images
        } else {
            plan.per_noisy_images
        };
        let have = source.items.len();
        if have == 0 {
            return Err(Error::Data(format!("pool source '{}' is empty", source.tag)));
        }
        let take = want.min(have);
        if take < want {
            warnings.push(format!(
                "source '{}': wanted {want} images, only {have} available",
                source.tag
            ));
        }
        let mut order: Vec<usize> = (0..have).collect();
        let mut rng = StdRng::seed_from_u64(derive_seed(plan.seed, &source.tag));
        for i in (1..have).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        picks.extend(order.into_iter().take(take).map(|ii| (si, ii)));
    }

    let clipped = picks.iter().any(|&(si, ii)| {
        let img = sources[si].items[ii].1;
        plan.pixels_per_image > img.len()
    });
    if clipped {
        warnings.push(format!(
            "pixel budget {} exceeds image size; clipped to full images",
            plan.pixels_per_image
        ));
    }

    let per_image: Vec<Vec<PixelSample>> = picks
        .par_iter()
        .enumerate()
        .map(|(pick_idx, &(si, ii))| -> Result<Vec<PixelSample>> {
            let (id, img, gt) = &sources[si].items[ii];
            if gt.width() != img.width() || gt.height() != img.height() {
                return Err(Error::Data(format!(
                    "image '{id}': ground truth dimensions differ"
                )));
            }
            let grid = extract_hypercolumns(img, src, id)?;
            let total = img.len();
            let budget = plan.pixels_per_image.min(total);

            let mut rng = StdRng::seed_from_u64(derive_index_seed(plan.seed, pick_idx as u64));
            let mut indices: Vec<usize> = (0..total).collect();
            for i in (1..total).rev() {
                indices.swap(i, rng.gen_range(0..=i));
            }
            indices.truncate(budget);

            Ok(indices
                .into_iter()
                .map(|p| {
                    let (x, y) = (p % img.width(), p / img.width());
                    PixelSample {
                        features: grid.features.row(p).to_vec(),
                        is_character: gt.is_foreground(x, y),
                        origin: (id.clone(), x, y),
                    }
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let samples: Vec<PixelSample> = per_image.into_iter().flatten().collect();
    let character_count = samples.iter().filter(|s| s.is_character).count();
    Ok(PixelPool {
        background_count: samples.len() - character_count,
        character_count,
        samples,
        ranges: hypercolumn_ranges(src),
        warnings,
    })
}

// ---------------------------------------------------------------------------
// CRN training and reconstruction

pub struct CrnTrainOutput {
    pub model: DbnModel,
    pub validation_error: f64,
    pub epochs_run: usize,
}

/// Trains the per-pixel background/character classifier on a pool.
pub fn train_crn(
    pool: &PixelPool,
    hidden_sizes: &[usize],
    cfg: &TrainConfig,
) -> Result<CrnTrainOutput> {
    if pool.samples.is_empty() {
        return Err(Error::InvalidInput("empty pixel pool".into()));
    }
    if pool.character_count == 0 || pool.background_count == 0 {
        return Err(Error::InvalidInput(
            "pixel pool must contain both classes".into(),
        ));
    }
    let k1 = pool.ranges.len();
    let n = pool.samples.len();
    let mut features = Array2::zeros((n, k1));
    let mut labels = Vec::with_capacity(n);
    for (i, s) in pool.samples.iter().enumerate() {
        for (c, &v) in s.features.iter().enumerate() {
            features[[i, c]] = v;
        }
        labels.push(s.is_character as usize);
    }
    let features = normalize_features(&features, &pool.ranges);

    // Deterministic 90/10 train/valid carve of the pool.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = StdRng::seed_from_u64(derive_seed(cfg.seed, "crn-split"));
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let valid_n = (n / 10).max(1).min(n - 1);
    let (valid_idx, train_idx) = order.split_at(valid_n);
    let select = |idx: &[usize]| -> LabeledBatch {
        let inputs = features.select(ndarray::Axis(0), idx);
        let lbl = idx.iter().map(|&i| labels[i]).collect();
        LabeledBatch::new(inputs, lbl).expect("aligned by construction")
    };
    let train = select(train_idx);
    let valid = select(valid_idx);

    let model = dbn_pretrain(&train.inputs, hidden_sizes, 2, cfg)?;
    let out = dbn_finetune(
        &model,
        &train,
        &valid,
        &cfg.finetune,
        derive_seed(cfg.seed, "crn-finetune"),
    )?;
    let validation_error = crate::dbn::error_rate(&out.model, &valid);
    Ok(CrnTrainOutput {
        model: out.model,
        validation_error,
        epochs_run: out.epochs_run,
    })
}

/// Classifies every pixel of an image and assembles the binary
/// reconstruction: character pixels become 255.
pub fn reconstruct(
    img: &GrayImage,
    src: &dyn ResponseMapSource,
    id: &str,
    crn: &DbnModel,
) -> Result<BinaryImage> {
    if crn.input_len() != src.map_count() + 1 {
        return Err(Error::InvalidInput(format!(
            "CRN expects {} inputs but source provides {}",
            crn.input_len(),
            src.map_count() + 1
        )));
    }
    let grid = extract_hypercolumns(img, src, id)?;
    let inputs = normalize_features(&grid.features, &hypercolumn_ranges(src));
    let (classes, _) = dbn_predict(crn, &inputs);
    let data = classes
        .iter()
        .map(|&c| if c == 1 { 255 } else { 0 })
        .collect();
    BinaryImage::new(grid.width, grid.height, data)
}

// ---------------------------------------------------------------------------
// Pixel metrics

/// Foreground precision/recall/F1 and overall pixel accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct PixelMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Confusion accumulator over many images.
#[derive(Debug, Clone, Copy, Default)]
pub struct PixelTally {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl PixelTally {
    pub fn add(&mut self, pred: &BinaryImage, gt: &BinaryImage) -> Result<()> {
        if pred.width() != gt.width() || pred.height() != gt.height() {
            return Err(Error::InvalidInput("metric dimensions differ".into()));
        }
        for (p, g) in pred.as_slice().iter().zip(gt.as_slice()) {
            match (*p == 255, *g == 255) {
                (true, true) => self.tp += 1,
                (true, false) => self.fp += 1,
                (false, true) => self.fn_ += 1,
                (false, false) => self.tn += 1,
            }
        }
        Ok(())
    }

    pub fn metrics(&self) -> PixelMetrics {
        let total = (self.tp + self.fp + self.fn_ + self.tn) as f64;
        let accuracy = if total == 0.0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / total
        };
        let precision = if self.tp + self.fp == 0 {
            if self.tp + self.fn_ == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        };
        let recall = if self.tp + self.fn_ == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PixelMetrics {
            accuracy,
            precision,
            recall,
            f1,
        }
    }
}

/// Metrics of one reconstruction against its ground truth.
pub fn pixel_metrics(pred: &BinaryImage, gt: &BinaryImage) -> Result<PixelMetrics> {
    let mut tally = PixelTally::default();
    tally.add(pred, gt)?;
    Ok(tally.metrics())
}
