//! Probabilistic quadtree features with saliency pruning.
//!
//! A square power-of-two image is decomposed wherever a block's intensity
//! range exceeds a homogeneity tolerance. Split frequencies accumulated over a
//! training corpus form a decomposition map; blocks whose normalized
//! recurrence lies inside the `[mu, nu]` band are retained as the saliency
//! mask, and feature vectors are the mean intensities of the retained blocks
//! in depth-first order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Child quadrants in depth-first order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quadrant {
    Nw = 0,
    Ne = 1,
    Sw = 2,
    Se = 3,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Nw, Quadrant::Ne, Quadrant::Sw, Quadrant::Se];

    fn from_u8(v: u8) -> Result<Quadrant> {
        match v {
            0 => Ok(Quadrant::Nw),
            1 => Ok(Quadrant::Ne),
            2 => Ok(Quadrant::Sw),
            3 => Ok(Quadrant::Se),
            _ => Err(Error::Format(format!("bad quadrant byte {v}"))),
        }
    }
}

/// Path of quadrants from the root; the empty path is the root block.
///
/// Lexicographic ordering on paths equals depth-first preorder with parents
/// before children, which is the canonical feature order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BlockId {
    path: Vec<Quadrant>,
}

impl BlockId {
    pub fn root() -> Self {
        BlockId { path: Vec::new() }
    }

    pub fn child(&self, q: Quadrant) -> Self {
        let mut path = self.path.clone();
        path.push(q);
        BlockId { path }
    }

    pub fn parent(&self) -> Option<BlockId> {
        if self.path.is_empty() {
            None
        } else {
            Some(BlockId {
                path: self.path[..self.path.len() - 1].to_vec(),
            })
        }
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    pub fn path(&self) -> &[Quadrant] {
        &self.path
    }

    /// Pixel rectangle `(x0, y0, side)` of this block on a canvas.
    pub fn rect(&self, canvas: usize) -> (usize, usize, usize) {
        let mut x = 0;
        let mut y = 0;
        let mut side = canvas;
        for q in &self.path {
            side /= 2;
            match q {
                Quadrant::Nw => {}
                Quadrant::Ne => x += side,
                Quadrant::Sw => y += side,
                Quadrant::Se => {
                    x += side;
                    y += side;
                }
            }
        }
        (x, y, side)
    }
}

/// Which per-image event the decomposition map counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RecurrenceMode {
    /// Count images in which the block was split.
    #[default]
    SplitCount,
    /// Count images in which the block is a leaf of that image's tree.
    LeafOccupancy,
}

/// Per-block recurrence counts over a training corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionMap {
    pub counts: BTreeMap<BlockId, u32>,
    pub total_images: u32,
    pub canvas_size: usize,
    pub tau: f64,
    pub min_block: usize,
    pub mode: RecurrenceMode,
}

/// Retained blocks in depth-first order plus the band that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMask {
    retained: Vec<BlockId>,
    pub canvas_size: usize,
    pub mu: f64,
    pub nu: f64,
    pub tau: f64,
    pub min_block: usize,
    pub mode: RecurrenceMode,
}

impl SaliencyMask {
    pub fn retained(&self) -> &[BlockId] {
        &self.retained
    }

    pub fn feature_len(&self) -> usize {
        self.retained.len()
    }
}

fn check_canvas(img: &GrayImage) -> Result<usize> {
    let side = img.width();
    if side != img.height() || side == 0 || !side.is_power_of_two() {
        return Err(Error::InvalidInput(format!(
            "quadtree input must be a square power of two, got {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(side)
}

fn intensity_range(img: &GrayImage, x0: usize, y0: usize, side: usize) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for y in y0..y0 + side {
        for x in x0..x0 + side {
            let v = img.get(x, y);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    hi - lo
}

/// Set of blocks split by the homogeneity criterion.
///
/// A block splits iff its intensity range exceeds `tau` and its children
/// would still be at least `min_block` pixels on a side; splitting recurses
/// into all four children.
pub fn decompose(img: &GrayImage, tau: f64, min_block: usize) -> Result<BTreeSet<BlockId>> {
    if min_block < 1 {
        return Err(Error::InvalidInput("min_block must be >= 1".into()));
    }
    if tau < 0.0 {
        return Err(Error::InvalidInput("tau must be >= 0".into()));
    }
    let canvas = check_canvas(img)?;
    let mut split = BTreeSet::new();
    let mut stack = vec![BlockId::root()];
    while let Some(block) = stack.pop() {
        let (x0, y0, side) = block.rect(canvas);
        if side / 2 < min_block || side < 2 {
            continue;
        }
        if intensity_range(img, x0, y0, side) > tau {
            for q in Quadrant::ALL {
                stack.push(block.child(q));
            }
            split.insert(block);
        }
    }
    Ok(split)
}

/// Leaves of one image's decomposition: every child of a split block that is
/// not itself split, or the root when nothing splits.
pub fn leaves(split: &BTreeSet<BlockId>) -> BTreeSet<BlockId> {
    let mut out = BTreeSet::new();
    if split.is_empty() {
        out.insert(BlockId::root());
        return out;
    }
    if !split.contains(&BlockId::root()) {
        out.insert(BlockId::root());
    }
    for block in split {
        for q in Quadrant::ALL {
            let c = block.child(q);
            if !split.contains(&c) {
                out.insert(c);
            }
        }
    }
    out
}

/// Accumulates per-block recurrence counts over a training corpus.
pub fn build_decomposition_map(
    images: &[GrayImage],
    tau: f64,
    min_block: usize,
    mode: RecurrenceMode,
) -> Result<DecompositionMap> {
    let first = images
        .first()
        .ok_or_else(|| Error::InvalidInput("decomposition map needs >= 1 image".into()))?;
    let canvas = check_canvas(first)?;
    for img in images {
        if img.width() != canvas || img.height() != canvas {
            return Err(Error::InvalidInput(
                "decomposition map images must share dimensions".into(),
            ));
        }
    }

    let mut counts: BTreeMap<BlockId, u32> = BTreeMap::new();
    for img in images {
        let split = decompose(img, tau, min_block)?;
        let counted = match mode {
            RecurrenceMode::SplitCount => split,
            RecurrenceMode::LeafOccupancy => leaves(&split),
        };
        for block in counted {
            *counts.entry(block).or_insert(0) += 1;
        }
    }
    Ok(DecompositionMap {
        counts,
        total_images: images.len() as u32,
        canvas_size: canvas,
        tau,
        min_block,
        mode,
    })
}

/// Retains blocks whose recurrence `count / total` lies in `[mu, nu]`; the
/// root is always retained so no image maps to an empty vector.
pub fn build_saliency_mask(map: &DecompositionMap, mu: f64, nu: f64) -> Result<SaliencyMask> {
    if !(0.0..=1.0).contains(&mu) || !(0.0..=1.0).contains(&nu) || mu >= nu {
        return Err(Error::InvalidInput(format!(
            "saliency band must satisfy 0 <= mu < nu <= 1, got mu={mu} nu={nu}"
        )));
    }
    if map.total_images == 0 {
        return Err(Error::InvalidInput("empty decomposition map".into()));
    }
    let total = map.total_images as f64;
    let mut retained: BTreeSet<BlockId> = map
        .counts
        .iter()
        .filter(|(_, &c)| {
            let r = c as f64 / total;
            r >= mu && r <= nu
        })
        .map(|(b, _)| b.clone())
        .collect();
    retained.insert(BlockId::root());
    Ok(SaliencyMask {
        retained: retained.into_iter().collect(),
        canvas_size: map.canvas_size,
        mu,
        nu,
        tau: map.tau,
        min_block: map.min_block,
        mode: map.mode,
    })
}

/// Mean intensity of every retained block, in the mask's depth-first order.
pub fn featurize(img: &GrayImage, mask: &SaliencyMask) -> Result<Vec<f64>> {
    if img.width() != mask.canvas_size || img.height() != mask.canvas_size {
        return Err(Error::InvalidInput(format!(
            "image {}x{} does not match mask canvas {}",
            img.width(),
            img.height(),
            mask.canvas_size
        )));
    }
    let mut out = Vec::with_capacity(mask.retained.len());
    for block in &mask.retained {
        let (x0, y0, side) = block.rect(mask.canvas_size);
        let mut sum = 0.0;
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                sum += img.get(x, y);
            }
        }
        out.push(sum / (side * side) as f64);
    }
    Ok(out)
}

const MASK_MAGIC: &[u8; 4] = b"QGSM";
const MASK_VERSION: u32 = 1;

impl SaliencyMask {
    /// Versioned binary serialization; round-trips bit-exactly including block
    /// order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MASK_MAGIC);
        out.extend_from_slice(&MASK_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.canvas_size as u32).to_le_bytes());
        out.extend_from_slice(&self.mu.to_le_bytes());
        out.extend_from_slice(&self.nu.to_le_bytes());
        out.extend_from_slice(&self.tau.to_le_bytes());
        out.extend_from_slice(&(self.min_block as u32).to_le_bytes());
        out.push(match self.mode {
            RecurrenceMode::SplitCount => 0,
            RecurrenceMode::LeafOccupancy => 1,
        });
        out.extend_from_slice(&(self.retained.len() as u32).to_le_bytes());
        for block in &self.retained {
            out.push(block.depth() as u8);
            for q in block.path() {
                out.push(*q as u8);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<SaliencyMask> {
        let err = |m: &str| Error::Format(format!("saliency mask: {m}"));
        if bytes.len() < 4 || &bytes[..4] != MASK_MAGIC {
            return Err(err("bad magic"));
        }
        let mut pos = 4usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes
                .get(pos..pos + n)
                .ok_or_else(|| Error::Format("saliency mask: truncated".into()))?;
            pos += n;
            Ok(s)
        };
        let u32_at = |s: &[u8]| u32::from_le_bytes([s[0], s[1], s[2], s[3]]);
        let f64_at = |s: &[u8]| {
            f64::from_le_bytes([s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7]])
        };

        let version = u32_at(take(4)?);
        if version != MASK_VERSION {
            return Err(err(&format!("unsupported version {version}")));
        }
        let canvas_size = u32_at(take(4)?) as usize;
        let mu = f64_at(take(8)?);
        let nu = f64_at(take(8)?);
        let tau = f64_at(take(8)?);
        let min_block = u32_at(take(4)?) as usize;
        let mode = match take(1)?[0] {
            0 => RecurrenceMode::SplitCount,
            1 => RecurrenceMode::LeafOccupancy,
            m => return Err(err(&format!("bad recurrence mode {m}"))),
        };
        let count = u32_at(take(4)?) as usize;
        let mut retained = Vec::with_capacity(count);
        for _ in 0..count {
            let depth = take(1)?[0] as usize;
            let mut path = Vec::with_capacity(depth);
            for &b in take(depth)? {
                path.push(Quadrant::from_u8(b)?);
            }
            retained.push(BlockId { path });
        }
        if pos != bytes.len() {
            return Err(err("trailing bytes"));
        }
        Ok(SaliencyMask {
            retained,
            canvas_size,
            mu,
            nu,
            tau,
            min_block,
            mode,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SaliencyMask> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Grayscale rendering of retained blocks: deeper blocks are brighter and
    /// block borders are white, analogous to a saliency-mask figure.
    pub fn to_visualization(&self) -> GrayImage {
        let size = self.canvas_size;
        let max_depth = self
            .retained
            .iter()
            .map(|b| b.depth())
            .max()
            .unwrap_or(0)
            .max(1);
        let mut data = vec![0.0f64; size * size];
        for block in &self.retained {
            let (x0, y0, side) = block.rect(size);
            let shade = 0.25 + 0.6 * block.depth() as f64 / max_depth as f64;
            for y in y0..y0 + side {
                for x in x0..x0 + side {
                    let border = x == x0 || y == y0 || x == x0 + side - 1 || y == y0 + side - 1;
                    let v = if border { 1.0 } else { shade };
                    let idx = y * size + x;
                    data[idx] = data[idx].max(v);
                }
            }
        }
        GrayImage::from_raw_clamped(size, size, data)
    }
}
