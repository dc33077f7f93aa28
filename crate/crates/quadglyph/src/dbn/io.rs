//! Versioned binary model files.
//!
//! Layout: magic `QGDM`, version, architecture, then per layer a row-major
//! little-endian f64 weight block and bias block, then the training-config
//! echo (JSON) and the seed. Round-trips are bit-exact.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{DbnModel, Layer, TrainConfig};
use crate::error::{Error, Result};

const MODEL_MAGIC: &[u8; 4] = b"QGDM";
const MODEL_VERSION: u32 = 1;

fn push_layer(out: &mut Vec<u8>, layer: &Layer) {
    out.extend_from_slice(&(layer.weights.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(layer.weights.ncols() as u32).to_le_bytes());
    for &w in layer.weights.iter() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    for &b in layer.bias.iter() {
        out.extend_from_slice(&b.to_le_bytes());
    }
}

pub fn model_to_bytes(model: &DbnModel, cfg: &TrainConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.hidden.len() as u32).to_le_bytes());
    for layer in &model.hidden {
        push_layer(&mut out, layer);
    }
    push_layer(&mut out, &model.output);
    let echo = serde_json::to_vec(cfg).expect("config serializes");
    out.extend_from_slice(&(echo.len() as u32).to_le_bytes());
    out.extend_from_slice(&echo);
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Format("model file truncated".into()))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let s = self.take(4)?;
        Ok(u32::from_le_bytes([s[0], s[1], s[2], s[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let s = self.take(8)?;
        Ok(f64::from_le_bytes([
            s[0], s[1], s[2], s[3], s[4], s[5], s[6], s[7],
        ]))
    }

    fn layer(&mut self) -> Result<Layer> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        let mut w = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            w.push(self.f64()?);
        }
        let weights = Array2::from_shape_vec((rows, cols), w)
            .map_err(|e| Error::Format(format!("bad weight block: {e}")))?;
        let mut b = Vec::with_capacity(cols);
        for _ in 0..cols {
            b.push(self.f64()?);
        }
        Ok(Layer {
            weights,
            bias: Array1::from_vec(b),
        })
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<(DbnModel, TrainConfig)> {
    if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("model file: bad magic".into()));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "model file: unsupported version {version}"
        )));
    }
    let hidden_count = r.u32()? as usize;
    let mut hidden = Vec::with_capacity(hidden_count);
    for _ in 0..hidden_count {
        hidden.push(r.layer()?);
    }
    let output = r.layer()?;
    let echo_len = r.u32()? as usize;
    let echo = r.take(echo_len)?;
    let cfg: TrainConfig = serde_json::from_slice(echo)
        .map_err(|e| Error::Format(format!("model file: bad config echo: {e}")))?;
    let seed_bytes = r.take(8)?;
    let seed = u64::from_le_bytes(seed_bytes.try_into().expect("8 bytes"));
    if seed != cfg.seed {
        return Err(Error::Format("model file: seed mismatch with config echo".into()));
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("model file: trailing bytes".into()));
    }
    Ok((DbnModel { hidden, output }, cfg))
}

pub fn save_model(path: &Path, model: &DbnModel, cfg: &TrainConfig) -> Result<()> {
    fs::write(path, model_to_bytes(model, cfg))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(DbnModel, TrainConfig)> {
    model_from_bytes(&fs::read(path)?)
}
