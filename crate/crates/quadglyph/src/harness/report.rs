//! Metrics report: the single deterministic record of a run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::EvalResult;
use crate::error::{Error, Result};
use crate::reconstruct::PixelMetrics;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Per-noise-corpus numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CorpusReport {
    /// Test-split reconstruction quality against the binarized ground truth.
    pub reconstruction: Option<PixelMetrics>,
    /// Retained quadtree block count (the classifier input width).
    pub feature_count: Option<usize>,
    pub eval: Option<EvalResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricsReport {
    /// Resolved config, echoed verbatim (TOML).
    pub config_echo: String,
    pub seed: u64,
    pub dataset: String,
    pub split_counts: (usize, usize, usize),
    /// Raw pixel dimension of the canonical images.
    pub raw_feature_dim: usize,
    pub crn_validation_error: Option<f64>,
    /// Keyed by noise kind ("awgn", "contrast", "motion").
    pub corpora: BTreeMap<String, CorpusReport>,
    /// SHA-256 over the report content with this field blanked.
    pub content_hash: String,
    /// Wall-clock seconds per stage; excluded from serialization so reports
    /// stay byte-identical across runs.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

impl MetricsReport {
    /// Fills `content_hash` from the canonical JSON encoding.
    pub fn seal(&mut self) {
        self.content_hash.clear();
        let json = serde_json::to_vec(&self).expect("report serializes");
        self.content_hash = sha256_hex(&json);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<MetricsReport> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("report: {e}")))
    }

    /// Flat CSV: one `noise,metric,value` row per reported number.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("noise,metric,value\n");
        let mut push = |noise: &str, metric: &str, value: f64| {
            out.push_str(&format!("{noise},{metric},{value}\n"));
        };
        if let Some(e) = self.crn_validation_error {
            push("all", "crn_validation_error", e);
        }
        push("all", "raw_feature_dim", self.raw_feature_dim as f64);
        for (noise, report) in &self.corpora {
            if let Some(m) = &report.reconstruction {
                push(noise, "recon_accuracy", m.accuracy);
                push(noise, "recon_precision", m.precision);
                push(noise, "recon_recall", m.recall);
                push(noise, "recon_f1", m.f1);
            }
            if let Some(n) = report.feature_count {
                push(noise, "feature_count", n as f64);
            }
            if let Some(e) = &report.eval {
                push(noise, "error_pct", e.error_pct);
                push(noise, "test_total", e.total as f64);
            }
        }
        out
    }

    /// Markdown error table: noise rows, metric columns.
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# Run report\n\ndataset: `{}`  \nseed: {}  \nsplits (train/valid/test): {}/{}/{}  \ncontent hash: `{}`\n\n",
            self.dataset,
            self.seed,
            self.split_counts.0,
            self.split_counts.1,
            self.split_counts.2,
            self.content_hash
        ));
        out.push_str("| Noise | Error (%) | Features | Raw dim | Recon F1 |\n");
        out.push_str("|---|---|---|---|---|\n");
        for (noise, report) in &self.corpora {
            let err = report
                .eval
                .as_ref()
                .map(|e| format!("{:.2}", e.error_pct))
                .unwrap_or_else(|| "-".into());
            let feats = report
                .feature_count
                .map(|n| n.to_string())
                .unwrap_or_else(|| "-".into());
            let f1 = report
                .reconstruction
                .as_ref()
                .map(|m| format!("{:.4}", m.f1))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "| {noise} | {err} | {feats} | {} | {f1} |\n",
                self.raw_feature_dim
            ));
        }
        out
    }

    /// Aligned plain-text rendering for terminals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "dataset {}  seed {}  splits {}/{}/{}\n",
            self.dataset,
            self.seed,
            self.split_counts.0,
            self.split_counts.1,
            self.split_counts.2
        ));
        out.push_str(&format!(
            "{:<10} {:>10} {:>10} {:>10} {:>10}\n",
            "noise", "error %", "features", "raw dim", "recon F1"
        ));
        for (noise, report) in &self.corpora {
            let err = report
                .eval
                .as_ref()
                .map(|e| format!("{:.2}", e.error_pct))
                .unwrap_or_else(|| "-".into());
            let feats = report
                .feature_count
                .map(|n| n.to_string())
                .unwrap_or_else(|| "-".into());
            let f1 = report
                .reconstruction
                .as_ref()
                .map(|m| format!("{:.4}", m.f1))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{noise:<10} {err:>10} {feats:>10} {:>10} {f1:>10}\n",
                self.raw_feature_dim
            ));
        }
        if !self.timings.is_empty() {
            out.push_str("\nstage timings (s):\n");
            for (stage, secs) in &self.timings {
                out.push_str(&format!("  {stage:<24} {secs:>8.2}\n"));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<ReportFormat> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!(
                "unknown report format '{other}' (csv|table|markdown)"
            ))),
        }
    }
}

pub fn render(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Table => report.to_table(),
        ReportFormat::Markdown => report.to_markdown(),
    }
}
