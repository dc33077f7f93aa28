//! Experiment configuration: a single human-editable TOML file that fully
//! determines a run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dbn::TrainConfig;
use crate::error::{Error, Result};
use crate::noise::{NoiseKind, NoiseSpec, SnrScale};
use crate::quadtree::RecurrenceMode;
use crate::reconstruct::CrnSamplingPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// IDX image/label files (MNIST layout).
    Idx,
    /// `root/<class>/<image>.png|pgm` directory tree.
    ImageDir,
    /// Procedurally rendered digit corpus; self-contained.
    Synthetic,
}

/// Which intensity polarity marks the character in the raw data. The
/// preprocessing chain standardizes everything to bright-on-black.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Foreground {
    #[default]
    Bright,
    Dark,
}

/// Split sizes, absolute or fractional. Fractions must sum to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitSpec {
    Counts { train: usize, valid: usize, test: usize },
    Fractions { train: f64, valid: f64, test: f64 },
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Fractions {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            SplitSpec::Fractions { train, valid, test } => {
                let sum = train + valid + test;
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "split fractions sum to {sum}, expected 1"
                    )));
                }
                if *train <= 0.0 || *valid < 0.0 || *test < 0.0 {
                    return Err(Error::Config("split fractions must be nonnegative".into()));
                }
            }
            SplitSpec::Counts { train, valid, test } => {
                if *train == 0 || *valid == 0 || *test == 0 {
                    return Err(Error::Config("split counts must be >= 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Resolves to (train, valid, test) sizes for `n` items.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        match *self {
            SplitSpec::Counts { train, valid, test } => {
                let want = train + valid + test;
                if want > n {
                    return Err(Error::Data(format!(
                        "splits need {want} items but the dataset has {n}"
                    )));
                }
                Ok((train, valid, test))
            }
            SplitSpec::Fractions { train, valid, .. } => {
                let t = (n as f64 * train).round() as usize;
                let v = (n as f64 * valid).round() as usize;
                if t + v >= n {
                    return Err(Error::Data("degenerate split: empty test set".into()));
                }
                Ok((t, v, n - t - v))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub format: DatasetFormat,
    pub classes: usize,
    pub foreground: Foreground,
    pub splits: SplitSpec,
    /// Cap on the number of items ingested (seeded shuffle first).
    pub limit: Option<usize>,
    // idx
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    // image-dir
    pub root: Option<PathBuf>,
    // synthetic
    pub count: usize,
    pub image_size: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            format: DatasetFormat::Synthetic,
            classes: 10,
            foreground: Foreground::Bright,
            splits: SplitSpec::default(),
            limit: None,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            root: None,
            count: 2000,
            image_size: 28,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Smoothing {
    #[default]
    NlMeans,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub smoothing: Smoothing,
    pub patch_radius: usize,
    pub search_radius: usize,
    pub strength: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            smoothing: Smoothing::NlMeans,
            patch_radius: 3,
            search_radius: 10,
            strength: 0.1,
        }
    }
}

/// One noise corpus to synthesize; per-kind defaults fill the blanks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEntry {
    pub kind: NoiseKind,
    pub snr_db: Option<f64>,
    #[serde(default)]
    pub snr_scale: SnrScale,
    pub contrast_divisor: Option<f64>,
    pub blur_len: Option<usize>,
    pub blur_angle_deg: Option<f64>,
}

impl NoiseEntry {
    pub fn of_kind(kind: NoiseKind) -> Self {
        NoiseEntry {
            kind,
            snr_db: None,
            snr_scale: SnrScale::Db,
            contrast_divisor: None,
            blur_len: None,
            blur_angle_deg: None,
        }
    }

    /// Resolves against the per-kind defaults; `seed` is the corpus-level
    /// noise seed.
    pub fn to_spec(&self, seed: u64) -> NoiseSpec {
        let mut spec = match self.kind {
            NoiseKind::Awgn => NoiseSpec::awgn(seed),
            NoiseKind::Contrast => NoiseSpec::contrast(seed),
            NoiseKind::Motion => NoiseSpec::motion(seed),
        };
        if let Some(snr) = self.snr_db {
            spec.snr_db = snr;
        }
        spec.snr_scale = self.snr_scale;
        if let Some(d) = self.contrast_divisor {
            spec.contrast_divisor = d;
        }
        if let Some(l) = self.blur_len {
            spec.blur_len = l;
        }
        if let Some(a) = self.blur_angle_deg {
            spec.blur_angle_deg = a;
        }
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrnConfig {
    pub architecture: Vec<usize>,
    /// Filter bank scales for the built-in response-map source.
    pub scales: Vec<f64>,
    /// Directory of externally exported response maps; overrides the filter
    /// bank when set (`<dir>/<id>_<k>.pgm`).
    pub map_dir: Option<PathBuf>,
    /// Map count for `map_dir` sources.
    pub map_count: usize,
    /// Train one CRN per noise type instead of one joint network.
    pub per_noise_training: bool,
    pub plan: CrnSamplingPlan,
    pub train: TrainConfig,
}

impl Default for CrnConfig {
    fn default() -> Self {
        CrnConfig {
            architecture: vec![200, 200],
            scales: vec![1.0, 2.0, 4.0],
            map_dir: None,
            map_count: 12,
            per_noise_training: false,
            plan: CrnSamplingPlan::default(),
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadtreeConfig {
    pub tau: f64,
    pub min_block: usize,
    pub mu: f64,
    pub nu: f64,
    pub recurrence_mode: RecurrenceMode,
}

impl Default for QuadtreeConfig {
    fn default() -> Self {
        QuadtreeConfig {
            tau: 0.1,
            min_block: 2,
            mu: 0.05,
            nu: 0.95,
            recurrence_mode: RecurrenceMode::SplitCount,
        }
    }
}

/// What the classifier consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    /// Saliency-pruned quadtree block means.
    #[default]
    Quadtree,
    /// Flattened pixels of the canonical image.
    RawPixels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoPassConfig {
    pub enabled: bool,
    pub reject_threshold: f64,
    pub high_res: usize,
}

impl Default for TwoPassConfig {
    fn default() -> Self {
        TwoPassConfig {
            enabled: false,
            reject_threshold: 0.5,
            high_res: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CcnConfig {
    /// Overrides the per-noise default winners when set.
    pub architecture: Option<Vec<usize>>,
    pub feature_mode: FeatureMode,
    /// Classify reconstructed images (true) or the noisy images directly.
    pub reconstruct: bool,
    pub two_pass: TwoPassConfig,
    pub train: TrainConfig,
}

impl Default for CcnConfig {
    fn default() -> Self {
        CcnConfig {
            architecture: None,
            feature_mode: FeatureMode::Quadtree,
            reconstruct: true,
            two_pass: TwoPassConfig::default(),
            train: TrainConfig::default(),
        }
    }
}

/// Everything a run needs; serialized verbatim into the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub canonical_size: usize,
    pub border: usize,
    pub dataset: DatasetConfig,
    pub preprocess: PreprocessConfig,
    pub noise: Vec<NoiseEntry>,
    pub crn: CrnConfig,
    pub quadtree: QuadtreeConfig,
    pub ccn: CcnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            out_dir: PathBuf::from("runs/default"),
            canonical_size: 32,
            border: 10,
            dataset: DatasetConfig::default(),
            preprocess: PreprocessConfig::default(),
            noise: vec![
                NoiseEntry::of_kind(NoiseKind::Awgn),
                NoiseEntry::of_kind(NoiseKind::Contrast),
                NoiseEntry::of_kind(NoiseKind::Motion),
            ],
            crn: CrnConfig::default(),
            quadtree: QuadtreeConfig::default(),
            ccn: CcnConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.canonical_size < 2 || !self.canonical_size.is_power_of_two() {
            return Err(Error::Config(format!(
                "canonical_size must be a power of two >= 2, got {}",
                self.canonical_size
            )));
        }
        self.dataset.splits.validate()?;
        if self.dataset.classes < 2 {
            return Err(Error::Config("dataset.classes must be >= 2".into()));
        }
        match self.dataset.format {
            DatasetFormat::Idx => {
                if self.dataset.train_images.is_none() || self.dataset.train_labels.is_none() {
                    return Err(Error::Config(
                        "idx datasets need train_images and train_labels paths".into(),
                    ));
                }
            }
            DatasetFormat::ImageDir => {
                if self.dataset.root.is_none() {
                    return Err(Error::Config("image-dir datasets need a root path".into()));
                }
            }
            DatasetFormat::Synthetic => {
                if self.dataset.count == 0 {
                    return Err(Error::Config("synthetic datasets need count >= 1".into()));
                }
            }
        }
        if self.noise.is_empty() {
            return Err(Error::Config("at least one noise entry is required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for entry in &self.noise {
            if !seen.insert(entry.kind) {
                return Err(Error::Config(format!(
                    "duplicate noise entry '{}'",
                    entry.kind.as_str()
                )));
            }
        }
        if !(self.quadtree.mu >= 0.0 && self.quadtree.mu < self.quadtree.nu && self.quadtree.nu <= 1.0) {
            return Err(Error::Config(format!(
                "quadtree band must satisfy 0 <= mu < nu <= 1, got mu={} nu={}",
                self.quadtree.mu, self.quadtree.nu
            )));
        }
        if self.quadtree.min_block == 0 {
            return Err(Error::Config("quadtree.min_block must be >= 1".into()));
        }
        if self.crn.architecture.is_empty() {
            return Err(Error::Config("crn.architecture must be nonempty".into()));
        }
        if self.ccn.two_pass.enabled && !self.ccn.two_pass.high_res.is_power_of_two() {
            return Err(Error::Config("two_pass.high_res must be a power of two".into()));
        }
        self.crn.plan.validate()?;
        self.crn.train.validate()?;
        self.ccn.train.validate()?;
        Ok(())
    }

    /// Architecture used for a noise corpus: the explicit override or the
    /// per-noise default winner.
    pub fn ccn_architecture(&self, kind: NoiseKind) -> Vec<usize> {
        self.ccn
            .architecture
            .clone()
            .unwrap_or_else(|| crate::classify::default_architecture(kind))
    }
}
