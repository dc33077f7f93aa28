//! Noisy handwritten character recognition pipeline.
//!
//! The crate implements a full desk-scale pipeline for recognizing handwritten
//! characters under synthetic noise:
//!
//! 1. [`raster`] — grayscale/binary raster types and the standardization chain
//!    (non-local-means smoothing, Otsu binarization, connected-component
//!    centering, resampling).
//! 2. [`noise`] — deterministic synthesis of three noise families: additive
//!    white Gaussian noise, reduced contrast, and linear motion blur.
//! 3. [`reconstruct`] — a per-pixel deep-belief-network denoiser fed by
//!    hypercolumn features stacked from rescaled response maps.
//! 4. [`quadtree`] — saliency-pruned probabilistic quadtree feature vectors.
//! 5. [`dbn`] — restricted Boltzmann machines, greedy stacked pretraining and
//!    supervised fine-tuning shared by the reconstruction and classification
//!    networks.
//! 6. [`classify`] — the character classification network and its
//!    architecture-sweep machinery.
//! 7. [`harness`] — configs, dataset ingestion, corpus files, experiment
//!    orchestration and reporting behind the `quadglyph` CLI.
//!
//! Every stage is a pure function of its inputs plus an explicit seed, so runs
//! are bit-reproducible. See the `examples/` directory for one runnable
//! program per capability.

pub mod classify;
pub mod dbn;
pub mod error;
pub mod harness;
pub mod noise;
pub mod quadtree;
pub mod raster;
pub mod reconstruct;
pub mod seeding;

pub use error::{Error, Result};
pub use raster::{BinaryImage, ComponentLabeling, GrayImage};
