//! Staged experiment pipeline.
//!
//! preprocess -> synth-noise -> train-crn -> reconstruct -> fit-quadtree ->
//! featurize -> train-ccn -> evaluate, with every intermediate artifact
//! persisted under the run directory and a content-keyed manifest per stage
//! so `--resume` re-executes only what changed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{
    ExperimentConfig, FeatureMode, Foreground, PreprocessConfig, Smoothing,
};
use super::corpus::{Corpus, FeatureSet, Raster};
use super::ingest::{ingest, SplitDataset};
use super::report::{sha256_hex, CorpusReport, MetricsReport};
use crate::classify::{evaluate, evaluate_two_pass, train_ccn, CcnSpec, EvalResult};
use crate::dbn::{load_model, save_model, DbnModel};
use crate::error::{Error, Result};
use crate::noise::{apply_noise, NoiseKind, NoiseSpec};
use crate::quadtree::{build_decomposition_map, build_saliency_mask, featurize, SaliencyMask};
use crate::raster::{
    binarize, center_pad_square, connected_components, idx, io as raster_io, nl_means,
    otsu_threshold, resample_bilinear, resample_nearest, BinaryImage, GrayImage,
};
use crate::reconstruct::{
    build_pixel_pool, reconstruct, train_crn, FileSource, FilterBankSource, PixelTally,
    PoolSource, ResponseMapSource,
};
use crate::seeding::{derive_index_seed, derive_seed};

pub const SPLITS: [&str; 3] = ["train", "valid", "test"];

/// Pipeline cutoff, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Preprocess,
    SynthNoise,
    TrainCrn,
    Reconstruct,
    FitQuadtree,
    Featurize,
    TrainCcn,
    Evaluate,
}

// ---------------------------------------------------------------------------
// Pure per-stage helpers

/// One preprocessed image: standardized native-size gray, its canonical
/// resampling, and the binarized canonical ground truth.
pub struct PreImage {
    pub native: GrayImage,
    pub canonical: GrayImage,
    pub gt: BinaryImage,
}

/// The standardize chain for one raw image: optional non-local-means
/// smoothing, Otsu binarization, largest-component centering on a square
/// canvas, bright-foreground polarity, and canonical resampling (bilinear for
/// gray, nearest for the binary ground truth).
pub fn preprocess_image(
    raw: &GrayImage,
    pcfg: &PreprocessConfig,
    foreground: Foreground,
    canonical: usize,
    border: usize,
) -> Result<PreImage> {
    let side = 2 * pcfg.patch_radius + 1;
    let smooth = match pcfg.smoothing {
        Smoothing::NlMeans if raw.width() >= side && raw.height() >= side => nl_means(
            raw,
            pcfg.patch_radius,
            pcfg.search_radius.max(pcfg.patch_radius),
            pcfg.strength,
        )?,
        _ => raw.clone(),
    };
    let t = otsu_threshold(&smooth)?;
    let bin = binarize(&smooth, t, foreground == Foreground::Dark)?;

    // Standardize polarity: bright character on black background.
    let bright = match foreground {
        Foreground::Bright => smooth,
        Foreground::Dark => GrayImage::from_fn(smooth.width(), smooth.height(), |x, y| {
            1.0 - smooth.get(x, y)
        })?,
    };

    let labeling = connected_components(&bin);
    let (native, gt_native) = if labeling.largest_id.is_some() {
        let native = center_pad_square(&bright, &bin, border)?;
        let gt_gray = center_pad_square(&bin.to_gray(), &bin, border)?;
        (native, binarize(&gt_gray, 0.5, false)?)
    } else {
        // Blank image: nothing to center; pad onto a square canvas as-is.
        let side = bright.width().max(bright.height()) + 2 * border;
        let mut data = vec![0.0; side * side];
        for y in 0..bright.height() {
            for x in 0..bright.width() {
                data[y * side + x] = bright.get(x, y);
            }
        }
        let native = GrayImage::new(side, side, data)?;
        let gt = BinaryImage::new(side, side, vec![0; side * side])?;
        (native, gt)
    };

    let canonical_img = resample_bilinear(&native, canonical, canonical)?;
    let gt = resample_nearest(&gt_native, canonical, canonical)?;
    Ok(PreImage {
        native,
        canonical: canonical_img,
        gt,
    })
}

/// Preprocesses a labeled split in parallel.
pub fn preprocess_split(
    items: &[(GrayImage, u8)],
    pcfg: &PreprocessConfig,
    foreground: Foreground,
    canonical: usize,
    border: usize,
) -> Result<Vec<(PreImage, u8)>> {
    items
        .par_iter()
        .map(|(img, label)| {
            preprocess_image(img, pcfg, foreground, canonical, border).map(|p| (p, *label))
        })
        .collect()
}

/// Applies one noise spec to a split of native images (per-image seed
/// substreams) and resamples to the canonical size.
pub fn noisify_split(
    natives: &[GrayImage],
    spec: &NoiseSpec,
    split_seed: u64,
    canonical: usize,
) -> Result<Vec<GrayImage>> {
    natives
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            let mut per_image = spec.clone();
            per_image.seed = derive_index_seed(split_seed, i as u64);
            let noisy = apply_noise(img, &per_image)?;
            resample_bilinear(&noisy, canonical, canonical)
        })
        .collect()
}

/// Reconstructs a corpus of images in parallel with a frozen CRN.
pub fn reconstruct_corpus(
    images: &[GrayImage],
    src: &dyn ResponseMapSource,
    crn: &DbnModel,
    id_prefix: &str,
) -> Result<Vec<BinaryImage>> {
    images
        .par_iter()
        .enumerate()
        .map(|(i, img)| reconstruct(img, src, &format!("{id_prefix}/{i:05}"), crn))
        .collect()
}

/// Quadtree features for a corpus under a frozen mask.
pub fn quadtree_features(
    images: &[GrayImage],
    labels: &[u8],
    mask: &SaliencyMask,
) -> Result<FeatureSet> {
    let rows: Vec<Vec<f64>> = images
        .par_iter()
        .map(|img| featurize(img, mask))
        .collect::<Result<_>>()?;
    FeatureSet::new(rows, labels.to_vec())
}

/// Flattened-pixel features for the raw-pixel baseline.
pub fn raw_pixel_features(images: &[GrayImage], labels: &[u8]) -> Result<FeatureSet> {
    let rows: Vec<Vec<f64>> = images.iter().map(|img| img.as_slice().to_vec()).collect();
    FeatureSet::new(rows, labels.to_vec())
}

/// Grayscale rendering of a decomposition map's normalized recurrence,
/// deepest blocks drawn last.
pub fn decomposition_map_visualization(map: &crate::quadtree::DecompositionMap) -> GrayImage {
    let size = map.canvas_size;
    let mut data = vec![0.0f64; size * size];
    let mut blocks: Vec<_> = map.counts.iter().collect();
    blocks.sort_by_key(|(b, _)| b.depth());
    for (block, &count) in blocks {
        let (x0, y0, side) = block.rect(size);
        let r = count as f64 / map.total_images as f64;
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                data[y * size + x] = r;
            }
        }
    }
    GrayImage::from_raw_clamped(size, size, data)
}

// ---------------------------------------------------------------------------
// Stage cache

#[derive(Serialize, Deserialize)]
struct StageManifest {
    stage: String,
    key: String,
    files: Vec<(String, String)>,
}

pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub out_dir: PathBuf,
    pub resume: bool,
    timings: Vec<(String, f64)>,
}

impl Pipeline {
    pub fn new(mut cfg: ExperimentConfig, out_dir: Option<PathBuf>, resume: bool) -> Pipeline {
        if let Some(dir) = out_dir {
            cfg.out_dir = dir;
        }
        Pipeline {
            out_dir: cfg.out_dir.clone(),
            cfg,
            resume,
            timings: Vec::new(),
        }
    }

    fn stage_dir(&self, name: &str) -> PathBuf {
        self.out_dir.join("stages").join(name)
    }

    /// Runs (or reuses) a stage. `compute` must write every artifact into the
    /// stage directory; the manifest records their hashes under the key.
    fn run_stage(
        &mut self,
        name: &str,
        key_material: &str,
        compute: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<String> {
        let key = sha256_hex(key_material.as_bytes());
        let dir = self.stage_dir(name);
        let manifest_path = dir.join("manifest.json");

        if self.resume && manifest_path.exists() {
            if let Ok(manifest) =
                serde_json::from_str::<StageManifest>(&fs::read_to_string(&manifest_path)?)
            {
                let intact = manifest.key == key
                    && manifest.files.iter().all(|(file, hash)| {
                        fs::read(dir.join(file))
                            .map(|bytes| sha256_hex(&bytes) == *hash)
                            .unwrap_or(false)
                    });
                if intact {
                    self.timings.push((format!("{name} (cached)"), 0.0));
                    return Ok(key);
                }
            }
        }

        let start = Instant::now();
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        compute(&dir)?;

        let mut files = Vec::new();
        let mut names: Vec<String> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        for file in names {
            let hash = sha256_hex(&fs::read(dir.join(&file))?);
            files.push((file, hash));
        }
        let manifest = StageManifest {
            stage: name.to_string(),
            key: key.clone(),
            files,
        };
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap())?;
        self.timings.push((name.to_string(), start.elapsed().as_secs_f64()));
        Ok(key)
    }

    fn json<T: Serialize>(value: &T) -> String {
        serde_json::to_string(value).expect("config slices serialize")
    }

    /// Executes stages up to and including `upto`. Returns the sealed report
    /// when the evaluate stage ran.
    pub fn run(&mut self, upto: Stage) -> Result<Option<MetricsReport>> {
        self.cfg.validate()?;
        fs::create_dir_all(&self.out_dir)?;
        let cfg = self.cfg.clone();
        let seed = cfg.seed;

        // --- ingest (in memory; key feeds downstream stages)
        let start = Instant::now();
        let dataset = ingest(&cfg.dataset, seed)?;
        let ingest_key = sha256_hex(
            format!("{}|{seed}", Self::json(&cfg.dataset)).as_bytes(),
        );
        self.timings.push(("ingest".into(), start.elapsed().as_secs_f64()));
        let split_counts = dataset.counts();

        // --- preprocess
        let pre_key = self.stage_preprocess(&ingest_key, &dataset)?;
        if upto == Stage::Preprocess {
            return Ok(None);
        }

        // Resolutions this run classifies at.
        let mut resolutions = vec![cfg.canonical_size];
        if cfg.ccn.two_pass.enabled {
            resolutions.push(cfg.ccn.two_pass.high_res);
        }

        // --- synth-noise, per kind and resolution
        let mut noise_keys: BTreeMap<(NoiseKind, usize), String> = BTreeMap::new();
        for entry in &cfg.noise.clone() {
            let spec = entry.to_spec(derive_seed(seed, &format!("noise-{}", entry.kind.as_str())));
            for &res in &resolutions {
                let key = self.stage_noise(&pre_key, &spec, res)?;
                noise_keys.insert((entry.kind, res), key);
            }
        }
        if upto == Stage::SynthNoise {
            return Ok(None);
        }

        // --- train-crn (train-split pixels only)
        let crn_key = if cfg.ccn.reconstruct {
            Some(self.stage_crn(&pre_key, &noise_keys)?)
        } else {
            None
        };
        if upto == Stage::TrainCrn {
            return Ok(None);
        }

        // --- reconstruct
        let mut recon_keys: BTreeMap<(NoiseKind, usize), String> = BTreeMap::new();
        if let Some(crn_key) = &crn_key {
            for (&(kind, res), noise_key) in noise_keys.clone().iter() {
                let key = self.stage_reconstruct(crn_key, noise_key, kind, res)?;
                recon_keys.insert((kind, res), key);
            }
        }
        if upto == Stage::Reconstruct {
            return Ok(None);
        }

        // --- fit-quadtree (train split only) + featurize
        let mut feature_keys: BTreeMap<(NoiseKind, usize), String> = BTreeMap::new();
        let mut feature_counts: BTreeMap<String, usize> = BTreeMap::new();
        for entry in &cfg.noise.clone() {
            for &res in &resolutions {
                let kind = entry.kind;
                let upstream = if cfg.ccn.reconstruct {
                    recon_keys[&(kind, res)].clone()
                } else {
                    noise_keys[&(kind, res)].clone()
                };
                let (qt_key, count) = match cfg.ccn.feature_mode {
                    FeatureMode::Quadtree => {
                        let (key, count) = self.stage_quadtree(&upstream, kind, res)?;
                        (key, Some(count))
                    }
                    FeatureMode::RawPixels => (upstream.clone(), None),
                };
                if upto >= Stage::Featurize {
                    let fkey = self.stage_featurize(&qt_key, kind, res)?;
                    feature_keys.insert((kind, res), fkey);
                }
                if res == cfg.canonical_size {
                    if let Some(c) = count {
                        feature_counts.insert(kind.as_str().to_string(), c);
                    }
                }
            }
        }
        if upto == Stage::FitQuadtree || upto == Stage::Featurize {
            return Ok(None);
        }

        // --- train-ccn + evaluate
        let mut evals: BTreeMap<String, EvalResult> = BTreeMap::new();
        for entry in &cfg.noise.clone() {
            let kind = entry.kind;
            let key = self.stage_ccn(&feature_keys, kind, &resolutions, upto)?;
            if upto >= Stage::Evaluate {
                if let Some(eval) = key {
                    evals.insert(kind.as_str().to_string(), eval);
                }
            }
        }
        if upto < Stage::Evaluate {
            return Ok(None);
        }

        // --- report. The echo blanks the output directory so reports are
        // byte-identical wherever the run lands.
        let mut echo_cfg = cfg.clone();
        echo_cfg.out_dir = PathBuf::new();
        let mut report = MetricsReport {
            config_echo: echo_cfg.to_toml(),
            seed,
            dataset: dataset.descriptor.clone(),
            split_counts,
            raw_feature_dim: cfg.canonical_size * cfg.canonical_size,
            crn_validation_error: self.read_crn_validation_error(),
            corpora: BTreeMap::new(),
            content_hash: String::new(),
            timings: std::mem::take(&mut self.timings),
        };
        for entry in &cfg.noise {
            let kind_name = entry.kind.as_str().to_string();
            let reconstruction = self.read_recon_metrics(entry.kind, cfg.canonical_size);
            report.corpora.insert(
                kind_name.clone(),
                CorpusReport {
                    reconstruction,
                    feature_count: feature_counts.get(&kind_name).copied(),
                    eval: evals.get(&kind_name).cloned(),
                },
            );
        }
        report.seal();

        fs::write(self.out_dir.join("report.json"), report.to_json())?;
        fs::write(self.out_dir.join("report.csv"), report.to_csv())?;
        fs::write(self.out_dir.join("report.md"), report.to_markdown())?;
        let timing_text: String = report
            .timings
            .iter()
            .map(|(s, t)| format!("{s}\t{t:.3}\n"))
            .collect();
        fs::write(self.out_dir.join("timings.txt"), timing_text)?;
        Ok(Some(report))
    }

    // --- individual stages ------------------------------------------------

    fn stage_preprocess(&mut self, ingest_key: &str, dataset: &SplitDataset) -> Result<String> {
        let cfg = self.cfg.clone();
        let material = format!(
            "{ingest_key}|{}|{}|{}|{}",
            Self::json(&cfg.preprocess),
            cfg.canonical_size,
            cfg.border,
            Self::json(&cfg.dataset.foreground)
        );
        self.run_stage("preprocess", &material, |dir| {
            for (split, items) in SPLITS
                .iter()
                .zip([&dataset.train, &dataset.valid, &dataset.test])
            {
                let pre = preprocess_split(
                    items,
                    &cfg.preprocess,
                    cfg.dataset.foreground,
                    cfg.canonical_size,
                    cfg.border,
                )?;
                let native = Corpus {
                    items: pre
                        .iter()
                        .map(|(p, l)| (Raster::Gray(p.native.clone()), *l))
                        .collect(),
                };
                let canonical = Corpus {
                    items: pre
                        .iter()
                        .map(|(p, l)| (Raster::Gray(p.canonical.clone()), *l))
                        .collect(),
                };
                let gt = Corpus {
                    items: pre
                        .iter()
                        .map(|(p, l)| (Raster::Binary(p.gt.clone()), *l))
                        .collect(),
                };
                native.save(&dir.join(format!("{split}_native.qgc")))?;
                canonical.save(&dir.join(format!("{split}_canonical.qgc")))?;
                gt.save(&dir.join(format!("{split}_gt.qgc")))?;
            }
            Ok(())
        })
    }

    fn stage_noise(&mut self, pre_key: &str, spec: &NoiseSpec, res: usize) -> Result<String> {
        let name = format!("noise-{}-{res}", spec.kind.as_str());
        let material = format!("{pre_key}|{}|{res}", Self::json(spec));
        let pre_dir = self.stage_dir("preprocess");
        let spec = spec.clone();
        self.run_stage(&name, &material, |dir| {
            for split in SPLITS {
                let native = Corpus::load(&pre_dir.join(format!("{split}_native.qgc")))?;
                let images = native.gray_images();
                let labels = native.labels();
                let split_seed = derive_seed(spec.seed, split);
                let noisy = noisify_split(&images, &spec, split_seed, res)?;
                let corpus = Corpus {
                    items: noisy
                        .iter()
                        .zip(&labels)
                        .map(|(img, l)| (Raster::Gray(img.clone()), *l))
                        .collect(),
                };
                corpus.save(&dir.join(format!("{split}.qgc")))?;
                // IDX export for interop with external tooling.
                idx::write_images(&dir.join(format!("{split}-images.idx")), &noisy)?;
                idx::write_labels(&dir.join(format!("{split}-labels.idx")), &labels)?;
            }
            Ok(())
        })
    }

    fn response_source(&self) -> Result<Box<dyn ResponseMapSource>> {
        match &self.cfg.crn.map_dir {
            Some(dir) => Ok(Box::new(FileSource::new(dir.clone(), self.cfg.crn.map_count)?)),
            None => Ok(Box::new(FilterBankSource::new(&self.cfg.crn.scales)?)),
        }
    }

    /// Per-noise CRN model name; the joint model uses `crn.bin`.
    fn crn_model_file(&self, kind: Option<NoiseKind>) -> String {
        match (self.cfg.crn.per_noise_training, kind) {
            (true, Some(k)) => format!("crn-{}.bin", k.as_str()),
            _ => "crn.bin".to_string(),
        }
    }

    fn stage_crn(
        &mut self,
        pre_key: &str,
        noise_keys: &BTreeMap<(NoiseKind, usize), String>,
    ) -> Result<String> {
        let cfg = self.cfg.clone();
        let res = cfg.canonical_size;
        let upstream: Vec<String> = noise_keys
            .iter()
            .filter(|((_, r), _)| *r == res)
            .map(|(_, k)| k.clone())
            .collect();
        let material = format!(
            "{pre_key}|{}|{}|{}",
            upstream.join(","),
            Self::json(&cfg.crn),
            cfg.seed
        );
        let pre_dir = self.stage_dir("preprocess");
        let noise_dirs: Vec<(NoiseKind, PathBuf)> = cfg
            .noise
            .iter()
            .map(|e| (e.kind, self.stage_dir(&format!("noise-{}-{res}", e.kind.as_str()))))
            .collect();
        let source = self.response_source()?;
        let per_noise = cfg.crn.per_noise_training;

        self.run_stage("crn", &material, |dir| {
            let clean = Corpus::load(&pre_dir.join("train_canonical.qgc"))?;
            let gt = Corpus::load(&pre_dir.join("train_gt.qgc"))?;
            let clean_images = clean.gray_images();
            let gts: Vec<&BinaryImage> = gt
                .items
                .iter()
                .map(|(r, _)| r.as_binary())
                .collect::<Result<_>>()?;

            let mut noisy_corpora: Vec<(NoiseKind, Vec<GrayImage>)> = Vec::new();
            for (kind, ndir) in &noise_dirs {
                let corpus = Corpus::load(&ndir.join("train.qgc"))?;
                noisy_corpora.push((*kind, corpus.gray_images()));
            }

            let mut plan = cfg.crn.plan.clone();
            plan.seed = derive_seed(cfg.seed, "crn-plan");
            let mut train_cfg = cfg.crn.train.clone();
            train_cfg.seed = derive_seed(cfg.seed, "crn-train");

            fn build_sources<'a>(
                kinds: &'a [(NoiseKind, Vec<GrayImage>)],
                clean_images: &'a [GrayImage],
                gts: &'a [&'a BinaryImage],
            ) -> Vec<PoolSource<'a>> {
                let mut sources: Vec<PoolSource> = kinds
                    .iter()
                    .map(|(kind, images)| PoolSource {
                        tag: kind.as_str().to_string(),
                        is_clean: false,
                        items: images
                            .iter()
                            .enumerate()
                            .zip(gts)
                            .map(|((i, img), gt)| {
                                (format!("{}/train/{i:05}", kind.as_str()), img, *gt)
                            })
                            .collect(),
                    })
                    .collect();
                sources.push(PoolSource {
                    tag: "clean".to_string(),
                    is_clean: true,
                    items: clean_images
                        .iter()
                        .enumerate()
                        .zip(gts)
                        .map(|((i, img), gt)| (format!("clean/train/{i:05}"), img, *gt))
                        .collect(),
                });
                sources
            }

            let mut stats = BTreeMap::new();
            if per_noise {
                for (kind, images) in &noisy_corpora {
                    let slice = [(*kind, images.clone())];
                    let sources = build_sources(&slice, &clean_images, &gts);
                    let pool = build_pixel_pool(&sources, source.as_ref(), &plan)?;
                    let out = train_crn(&pool, &cfg.crn.architecture, &train_cfg)?;
                    save_model(
                        &dir.join(format!("crn-{}.bin", kind.as_str())),
                        &out.model,
                        &train_cfg,
                    )?;
                    stats.insert(
                        kind.as_str().to_string(),
                        serde_json::json!({
                            "validation_error": out.validation_error,
                            "epochs_run": out.epochs_run,
                            "pool_character": pool.character_count,
                            "pool_background": pool.background_count,
                            "warnings": pool.warnings,
                        }),
                    );
                }
            } else {
                let sources = build_sources(&noisy_corpora, &clean_images, &gts);
                let pool = build_pixel_pool(&sources, source.as_ref(), &plan)?;
                let out = train_crn(&pool, &cfg.crn.architecture, &train_cfg)?;
                save_model(&dir.join("crn.bin"), &out.model, &train_cfg)?;
                stats.insert(
                    "joint".to_string(),
                    serde_json::json!({
                        "validation_error": out.validation_error,
                        "epochs_run": out.epochs_run,
                        "pool_character": pool.character_count,
                        "pool_background": pool.background_count,
                        "warnings": pool.warnings,
                    }),
                );
            }
            fs::write(
                dir.join("stats.json"),
                serde_json::to_string_pretty(&stats).unwrap(),
            )?;
            Ok(())
        })
    }

    fn read_crn_validation_error(&self) -> Option<f64> {
        let path = self.stage_dir("crn").join("stats.json");
        let text = fs::read_to_string(path).ok()?;
        let value: serde_json::Value = serde_json::from_str(&text).ok()?;
        value
            .as_object()?
            .values()
            .next()?
            .get("validation_error")?
            .as_f64()
    }

    fn stage_reconstruct(
        &mut self,
        crn_key: &str,
        noise_key: &str,
        kind: NoiseKind,
        res: usize,
    ) -> Result<String> {
        let name = format!("reconstruct-{}-{res}", kind.as_str());
        let material = format!("{crn_key}|{noise_key}|{res}");
        let crn_dir = self.stage_dir("crn");
        let noise_dir = self.stage_dir(&format!("noise-{}-{res}", kind.as_str()));
        let pre_dir = self.stage_dir("preprocess");
        let model_file = self.crn_model_file(Some(kind));
        let source = self.response_source()?;
        let canonical = self.cfg.canonical_size;

        self.run_stage(&name, &material, |dir| {
            let (crn, _) = load_model(&crn_dir.join(model_file))?;
            let mut metrics = BTreeMap::new();
            for split in SPLITS {
                let noisy = Corpus::load(&noise_dir.join(format!("{split}.qgc")))?;
                let images = noisy.gray_images();
                let labels = noisy.labels();
                let recon = reconstruct_corpus(
                    &images,
                    source.as_ref(),
                    &crn,
                    &format!("{}/{split}", kind.as_str()),
                )?;
                let corpus = Corpus {
                    items: recon
                        .iter()
                        .zip(&labels)
                        .map(|(r, l)| (Raster::Binary(r.clone()), *l))
                        .collect(),
                };
                corpus.save(&dir.join(format!("{split}.qgc")))?;

                // Pixel metrics against the canonical ground truth (only
                // defined at the canonical resolution).
                if res == canonical {
                    let gt = Corpus::load(&pre_dir.join(format!("{split}_gt.qgc")))?;
                    let mut tally = PixelTally::default();
                    for (r, (g, _)) in recon.iter().zip(&gt.items) {
                        tally.add(r, g.as_binary()?)?;
                    }
                    metrics.insert(split.to_string(), tally.metrics());
                }
            }
            fs::write(
                dir.join("metrics.json"),
                serde_json::to_string_pretty(&metrics).unwrap(),
            )?;
            Ok(())
        })
    }

    fn read_recon_metrics(
        &self,
        kind: NoiseKind,
        res: usize,
    ) -> Option<crate::reconstruct::PixelMetrics> {
        let path = self
            .stage_dir(&format!("reconstruct-{}-{res}", kind.as_str()))
            .join("metrics.json");
        let text = fs::read_to_string(path).ok()?;
        let map: BTreeMap<String, crate::reconstruct::PixelMetrics> =
            serde_json::from_str(&text).ok()?;
        map.get("test").copied()
    }

    /// Directory whose `<split>.qgc` files feed the feature stage.
    fn feature_source_dir(&self, kind: NoiseKind, res: usize) -> PathBuf {
        if self.cfg.ccn.reconstruct {
            self.stage_dir(&format!("reconstruct-{}-{res}", kind.as_str()))
        } else {
            self.stage_dir(&format!("noise-{}-{res}", kind.as_str()))
        }
    }

    fn stage_quadtree(
        &mut self,
        upstream_key: &str,
        kind: NoiseKind,
        res: usize,
    ) -> Result<(String, usize)> {
        let name = format!("quadtree-{}-{res}", kind.as_str());
        let qcfg = self.cfg.quadtree.clone();
        let material = format!("{upstream_key}|{}|{res}", Self::json(&qcfg));
        let src_dir = self.feature_source_dir(kind, res);

        let key = self.run_stage(&name, &material, |dir| {
            let train = Corpus::load(&src_dir.join("train.qgc"))?;
            let images = train.gray_images();
            let map = build_decomposition_map(&images, qcfg.tau, qcfg.min_block, qcfg.recurrence_mode)?;
            let mask = build_saliency_mask(&map, qcfg.mu, qcfg.nu)?;
            mask.save(&dir.join("mask.bin"))?;
            raster_io::write_pgm(&dir.join("mask.pgm"), &mask.to_visualization())?;
            raster_io::write_pgm(&dir.join("map.pgm"), &decomposition_map_visualization(&map))?;
            fs::write(
                dir.join("meta.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "feature_count": mask.feature_len(),
                    "total_images": map.total_images,
                }))
                .unwrap(),
            )?;
            Ok(())
        })?;
        let mask = SaliencyMask::load(&self.stage_dir(&name).join("mask.bin"))?;
        Ok((key, mask.feature_len()))
    }

    fn stage_featurize(&mut self, upstream_key: &str, kind: NoiseKind, res: usize) -> Result<String> {
        let name = format!("features-{}-{res}", kind.as_str());
        let mode = self.cfg.ccn.feature_mode;
        let material = format!("{upstream_key}|{}|{res}", Self::json(&mode));
        let src_dir = self.feature_source_dir(kind, res);
        let mask_path = self
            .stage_dir(&format!("quadtree-{}-{res}", kind.as_str()))
            .join("mask.bin");

        self.run_stage(&name, &material, |dir| {
            let mask = match mode {
                FeatureMode::Quadtree => Some(SaliencyMask::load(&mask_path)?),
                FeatureMode::RawPixels => None,
            };
            for split in SPLITS {
                let corpus = Corpus::load(&src_dir.join(format!("{split}.qgc")))?;
                let images = corpus.gray_images();
                let labels = corpus.labels();
                let features = match &mask {
                    Some(mask) => quadtree_features(&images, &labels, mask)?,
                    None => raw_pixel_features(&images, &labels)?,
                };
                features.save(&dir.join(format!("{split}.qgf")))?;
            }
            Ok(())
        })
    }

    fn stage_ccn(
        &mut self,
        feature_keys: &BTreeMap<(NoiseKind, usize), String>,
        kind: NoiseKind,
        resolutions: &[usize],
        upto: Stage,
    ) -> Result<Option<EvalResult>> {
        let cfg = self.cfg.clone();
        let res = cfg.canonical_size;
        let spec = CcnSpec {
            architecture: cfg.ccn_architecture(kind),
            classes: cfg.dataset.classes,
            train_cfg: {
                let mut t = cfg.ccn.train.clone();
                t.seed = derive_seed(cfg.seed, &format!("ccn-{}", kind.as_str()));
                t
            },
        };
        let name = format!("ccn-{}", kind.as_str());
        let upstream: Vec<String> = resolutions
            .iter()
            .map(|r| feature_keys[&(kind, *r)].clone())
            .collect();
        let material = format!(
            "{}|{}|{}|{upto_eval}",
            upstream.join(","),
            Self::json(&spec),
            Self::json(&cfg.ccn.two_pass),
            upto_eval = upto >= Stage::Evaluate
        );
        let feat_dir = self.stage_dir(&format!("features-{}-{res}", kind.as_str()));
        let hi_feat_dir = cfg
            .ccn
            .two_pass
            .enabled
            .then(|| self.stage_dir(&format!("features-{}-{}", kind.as_str(), cfg.ccn.two_pass.high_res)));
        let evaluate_too = upto >= Stage::Evaluate;

        self.run_stage(&name, &material, |dir| {
            let train = FeatureSet::load(&feat_dir.join("train.qgf"))?.to_batch()?;
            let valid = FeatureSet::load(&feat_dir.join("valid.qgf"))?.to_batch()?;
            let out = train_ccn(&train, &valid, &spec)?;
            save_model(&dir.join("ccn.bin"), &out.model, &spec.train_cfg)?;

            let mut hi_model = None;
            if let Some(hi_dir) = &hi_feat_dir {
                let hi_train = FeatureSet::load(&hi_dir.join("train.qgf"))?.to_batch()?;
                let hi_valid = FeatureSet::load(&hi_dir.join("valid.qgf"))?.to_batch()?;
                let mut hi_spec = spec.clone();
                hi_spec.train_cfg.seed = derive_seed(spec.train_cfg.seed, "two-pass");
                let hi_out = train_ccn(&hi_train, &hi_valid, &hi_spec)?;
                save_model(&dir.join("ccn-hi.bin"), &hi_out.model, &hi_spec.train_cfg)?;
                hi_model = Some(hi_out.model);
            }

            if evaluate_too {
                let test = FeatureSet::load(&feat_dir.join("test.qgf"))?.to_batch()?;
                let eval = match (&hi_model, &hi_feat_dir) {
                    (Some(hi), Some(hi_dir)) => {
                        let hi_test = FeatureSet::load(&hi_dir.join("test.qgf"))?.to_batch()?;
                        evaluate_two_pass(
                            &out.model,
                            &test,
                            hi,
                            &hi_test,
                            cfg.ccn.two_pass.reject_threshold,
                        )?
                    }
                    _ => evaluate(&out.model, &test)?,
                };
                fs::write(
                    dir.join("eval.json"),
                    serde_json::to_string_pretty(&eval).unwrap(),
                )?;
            }
            Ok(())
        })?;

        if evaluate_too {
            let text = fs::read_to_string(self.stage_dir(&name).join("eval.json"))?;
            let eval: EvalResult =
                serde_json::from_str(&text).map_err(|e| Error::Format(format!("eval.json: {e}")))?;
            Ok(Some(eval))
        } else {
            Ok(None)
        }
    }
}

/// Convenience wrapper: full pipeline run.
pub fn run_pipeline(
    cfg: ExperimentConfig,
    out_dir: Option<PathBuf>,
    resume: bool,
) -> Result<MetricsReport> {
    let mut pipeline = Pipeline::new(cfg, out_dir, resume);
    pipeline
        .run(Stage::Evaluate)?
        .ok_or_else(|| Error::Data("pipeline ended without a report".into()))
}
