//! Operational surface: configs, dataset ingestion, corpus containers,
//! pipeline orchestration, and reporting.

pub mod config;
pub mod corpus;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod synthcorpus;

pub use config::{DatasetFormat, ExperimentConfig, FeatureMode};
pub use ingest::{ingest, SplitDataset};
pub use pipeline::{run_pipeline, Pipeline, Stage};
pub use report::{render, MetricsReport, ReportFormat};
