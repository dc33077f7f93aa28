//! Dataset ingestion and deterministic splitting.

use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::config::{DatasetConfig, DatasetFormat};
use super::synthcorpus;
use crate::error::{Error, Result};
use crate::raster::{idx, io as raster_io, GrayImage};
use crate::seeding::derive_seed;

/// Raw labeled images split deterministically by the seeded shuffle.
pub struct SplitDataset {
    pub train: Vec<(GrayImage, u8)>,
    pub valid: Vec<(GrayImage, u8)>,
    pub test: Vec<(GrayImage, u8)>,
    /// Short human-readable descriptor for reports.
    pub descriptor: String,
}

impl SplitDataset {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }
}

fn load_idx_pair(images: &Path, labels: &Path) -> Result<Vec<(GrayImage, u8)>> {
    let imgs = idx::read_images(images)?;
    let lbls = idx::read_labels(labels)?;
    if imgs.len() != lbls.len() {
        return Err(Error::Data(format!(
            "{} images but {} labels ({} / {})",
            imgs.len(),
            lbls.len(),
            images.display(),
            labels.display()
        )));
    }
    Ok(imgs.into_iter().zip(lbls).collect())
}

fn load_image_dir(root: &Path, classes: usize) -> Result<Vec<(GrayImage, u8)>> {
    let mut items = Vec::new();
    let mut class_dirs: Vec<(u8, std::path::PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Ok(class) = name.parse::<u8>() {
            if (class as usize) < classes {
                class_dirs.push((class, entry.path()));
            }
        }
    }
    if class_dirs.is_empty() {
        return Err(Error::Data(format!(
            "no class subdirectories (0..{}) under {}",
            classes,
            root.display()
        )));
    }
    class_dirs.sort();
    for (class, dir) in class_dirs {
        let mut files: Vec<std::path::PathBuf> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                matches!(
                    p.extension().and_then(|e| e.to_str()),
                    Some("png") | Some("pgm")
                )
            })
            .collect();
        files.sort();
        for path in files {
            let img = match path.extension().and_then(|e| e.to_str()) {
                Some("png") => raster_io::read_png(&path)?,
                _ => raster_io::read_pgm(&path)?,
            };
            items.push((img, class));
        }
    }
    Ok(items)
}

/// Loads a dataset and splits it with a seeded shuffle. The shuffle, the
/// optional `limit` cap and the split boundaries all derive from the seed, so
/// identical configs give identical splits.
pub fn ingest(cfg: &DatasetConfig, seed: u64) -> Result<SplitDataset> {
    let (mut items, descriptor) = match cfg.format {
        DatasetFormat::Idx => {
            let images = cfg
                .train_images
                .as_ref()
                .ok_or_else(|| Error::Config("idx dataset needs train_images".into()))?;
            let labels = cfg
                .train_labels
                .as_ref()
                .ok_or_else(|| Error::Config("idx dataset needs train_labels".into()))?;
            let mut items = load_idx_pair(images, labels)?;
            if let (Some(ti), Some(tl)) = (&cfg.test_images, &cfg.test_labels) {
                items.extend(load_idx_pair(ti, tl)?);
            }
            (items, format!("idx:{}", images.display()))
        }
        DatasetFormat::ImageDir => {
            let root = cfg
                .root
                .as_ref()
                .ok_or_else(|| Error::Config("image-dir dataset needs root".into()))?;
            (
                load_image_dir(root, cfg.classes)?,
                format!("image-dir:{}", root.display()),
            )
        }
        DatasetFormat::Synthetic => {
            let (images, labels) =
                synthcorpus::generate_corpus(cfg.count, cfg.image_size, derive_seed(seed, "synth"))?;
            (
                images.into_iter().zip(labels).collect(),
                format!("synthetic:{}x{}px", cfg.count, cfg.image_size),
            )
        }
    };

    if items.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    if let Some(&(_, bad)) = items
        .iter()
        .find(|(_, l)| *l as usize >= cfg.classes)
    {
        return Err(Error::Data(format!(
            "label {bad} out of range for {} classes",
            cfg.classes
        )));
    }

    let mut rng = StdRng::seed_from_u64(derive_seed(seed, "ingest-shuffle"));
    for i in (1..items.len()).rev() {
        items.swap(i, rng.gen_range(0..=i));
    }
    if let Some(limit) = cfg.limit {
        items.truncate(limit);
    }

    let (n_train, n_valid, n_test) = cfg.splits.sizes(items.len())?;
    items.truncate(n_train + n_valid + n_test);
    let test = items.split_off(n_train + n_valid);
    let valid = items.split_off(n_train);
    Ok(SplitDataset {
        train: items,
        valid,
        test,
        descriptor,
    })
}
