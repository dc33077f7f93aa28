//! Labeled corpus containers.
//!
//! `.qgc` holds a sequence of labeled rasters (gray or binary, per-record
//! dimensions, 8-bit samples); `.qgf` holds fixed-width f64 feature vectors
//! with labels. Both are versioned, little-endian, and round-trip exactly.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{BinaryImage, GrayImage};

const CORPUS_MAGIC: &[u8; 4] = b"QGCR";
const FEATURES_MAGIC: &[u8; 4] = b"QGFV";
const VERSION: u32 = 1;

/// One stored raster: grayscale or binary.
#[derive(Debug, Clone, PartialEq)]
pub enum Raster {
    Gray(GrayImage),
    Binary(BinaryImage),
}

impl Raster {
    pub fn width(&self) -> usize {
        match self {
            Raster::Gray(g) => g.width(),
            Raster::Binary(b) => b.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Raster::Gray(g) => g.height(),
            Raster::Binary(b) => b.height(),
        }
    }

    pub fn as_gray(&self) -> GrayImage {
        match self {
            Raster::Gray(g) => g.clone(),
            Raster::Binary(b) => b.to_gray(),
        }
    }

    pub fn as_binary(&self) -> Result<&BinaryImage> {
        match self {
            Raster::Binary(b) => Ok(b),
            Raster::Gray(_) => Err(Error::Format("expected a binary record".into())),
        }
    }
}

/// Labeled raster sequence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub items: Vec<(Raster, u8)>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.items.iter().map(|(_, l)| *l).collect()
    }

    pub fn gray_images(&self) -> Vec<GrayImage> {
        self.items.iter().map(|(r, _)| r.as_gray()).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CORPUS_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.items.len() as u32).to_le_bytes());
        for (raster, label) in &self.items {
            out.extend_from_slice(&(raster.width() as u16).to_le_bytes());
            out.extend_from_slice(&(raster.height() as u16).to_le_bytes());
            match raster {
                Raster::Gray(g) => {
                    out.push(0);
                    out.push(*label);
                    out.extend_from_slice(&g.to_u8());
                }
                Raster::Binary(b) => {
                    out.push(1);
                    out.push(*label);
                    out.extend_from_slice(b.as_slice());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Corpus> {
        let err = |m: &str| Error::Format(format!("corpus file: {m}"));
        if bytes.len() < 12 || &bytes[..4] != CORPUS_MAGIC {
            return Err(err("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(err(&format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut pos = 12usize;
        let mut items = Vec::with_capacity(count);
        for _ in 0..count {
            let header = bytes
                .get(pos..pos + 6)
                .ok_or_else(|| err("truncated record header"))?;
            let w = u16::from_le_bytes([header[0], header[1]]) as usize;
            let h = u16::from_le_bytes([header[2], header[3]]) as usize;
            let kind = header[4];
            let label = header[5];
            pos += 6;
            let data = bytes
                .get(pos..pos + w * h)
                .ok_or_else(|| err("truncated record data"))?;
            pos += w * h;
            let raster = match kind {
                0 => Raster::Gray(GrayImage::from_u8(w, h, data)?),
                1 => Raster::Binary(BinaryImage::new(w, h, data.to_vec())?),
                k => return Err(err(&format!("bad record kind {k}"))),
            };
            items.push((raster, label));
        }
        if pos != bytes.len() {
            return Err(err("trailing bytes"));
        }
        Ok(Corpus { items })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Corpus> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// Fixed-width feature vectors with labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet {
    pub dim: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl FeatureSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<FeatureSet> {
        if features.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature rows vs {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features.first().map(|f| f.len()).unwrap_or(0);
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::InvalidInput("ragged feature rows".into()));
        }
        Ok(FeatureSet {
            dim,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn to_batch(&self) -> Result<crate::dbn::LabeledBatch> {
        crate::classify::features_to_batch(
            &self.features,
            &self.labels.iter().map(|&l| l as usize).collect::<Vec<_>>(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(FEATURES_MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&self.labels);
        for row in &self.features {
            for &v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<FeatureSet> {
        let err = |m: &str| Error::Format(format!("feature file: {m}"));
        if bytes.len() < 16 || &bytes[..4] != FEATURES_MAGIC {
            return Err(err("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != VERSION {
            return Err(err(&format!("unsupported version {version}")));
        }
        let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let expected = 16 + count + count * dim * 8;
        if bytes.len() != expected {
            return Err(err(&format!(
                "size {} does not match header ({expected})",
                bytes.len()
            )));
        }
        let labels = bytes[16..16 + count].to_vec();
        let mut features = Vec::with_capacity(count);
        let mut pos = 16 + count;
        for _ in 0..count {
            let mut row = Vec::with_capacity(dim);
            for _ in 0..dim {
                row.push(f64::from_le_bytes(
                    bytes[pos..pos + 8].try_into().unwrap(),
                ));
                pos += 8;
            }
            features.push(row);
        }
        Ok(FeatureSet {
            dim,
            features,
            labels,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<FeatureSet> {
        Self::from_bytes(&fs::read(path)?)
    }
}
