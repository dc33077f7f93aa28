//! Raster containers and the image standardization chain.
//!
//! Intensities are stored as `f64` in `[0, 1]`; 8-bit I/O converts via
//! `value / 255`. Binary rasters keep the `{0, 255}` alphabet (0 background,
//! 255 foreground) end to end.

mod components;
mod geometry;
pub mod idx;
pub mod io;
mod nlmeans;
mod otsu;
mod resample;

pub use components::{connected_components, ComponentLabeling};
pub use geometry::center_pad_square;
pub use nlmeans::nl_means;
pub use otsu::{binarize, otsu_threshold};
pub use resample::{resample_bilinear, resample_nearest};

use crate::error::{Error, Result};

/// Grayscale raster, row-major, intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "gray image data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidInput(
                "gray image intensity outside [0, 1]".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Constructs from raw values, clamping float dust into `[0, 1]`.
    pub(crate) fn from_raw_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Converts 8-bit samples via `v / 255`.
    pub fn from_u8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "byte length {} != {}x{}",
                bytes.len(),
                width,
                height
            )));
        }
        let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Quantizes to 8 bits via `round(v * 255)`.
    pub fn to_u8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mean of squared intensities; the signal power used for SNR calibration.
    pub fn mean_square(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Scales every intensity by `1 / divisor` (contrast reduction).
    pub fn scale(&self, divisor: f64) -> Result<GrayImage> {
        if divisor <= 0.0 {
            return Err(Error::InvalidInput("divisor must be positive".into()));
        }
        Ok(GrayImage::from_raw_clamped(
            self.width,
            self.height,
            self.data.iter().map(|v| v / divisor).collect(),
        ))
    }
}

/// Binary raster: 0 = background, 255 = foreground.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl BinaryImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "binary image data length {} != {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if data.iter().any(|&v| v != 0 && v != 255) {
            return Err(Error::InvalidInput(
                "binary image value outside {0, 255}".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == 255
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 255).count()
    }

    /// Lifts to a gray raster (0 -> 0.0, 255 -> 1.0).
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }
}
