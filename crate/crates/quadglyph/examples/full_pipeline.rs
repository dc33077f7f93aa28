//! End-to-end run of the staged pipeline on a small synthetic corpus, then
//! render the metrics report in all three formats.
//!
//! ```sh
//! cargo run --example full_pipeline
//! ```

use quadglyph::harness::{render, run_pipeline, ExperimentConfig, ReportFormat};
use quadglyph::Result;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.out_dir = "out/full-pipeline".into();
    cfg.dataset.count = 700;
    cfg.dataset.splits = quadglyph::harness::config::SplitSpec::Counts {
        train: 500,
        valid: 100,
        test: 100,
    };
    cfg.preprocess.smoothing = quadglyph::harness::config::Smoothing::None;
    cfg.crn.architecture = vec![64, 64];
    cfg.crn.plan.per_noisy_images = 20;
    cfg.crn.plan.clean_images = 10;
    cfg.crn.plan.pixels_per_image = 400;
    cfg.crn.train.pretrain.epochs = 2;
    cfg.crn.train.finetune.epochs = 25;
    cfg.crn.train.finetune.dropout_p = 0.0;
    cfg.crn.train.finetune.patience = 25;
    cfg.ccn.architecture = Some(vec![100, 100]);
    cfg.ccn.train.pretrain.epochs = 0;
    cfg.ccn.train.finetune.epochs = 150;
    cfg.ccn.train.finetune.dropout_p = 0.0;
    cfg.ccn.train.finetune.patience = 150;

    println!("running the staged pipeline into {} ...\n", cfg.out_dir.display());
    let report = run_pipeline(cfg, None, true)?;

    println!("--- table ---\n{}", render(&report, ReportFormat::Table));
    println!("--- markdown ---\n{}", render(&report, ReportFormat::Markdown));
    println!("--- csv ---\n{}", render(&report, ReportFormat::Csv));
    Ok(())
}
