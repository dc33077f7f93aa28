//! Sweep classifier architectures over one feature set and print the ranked
//! table.
//!
//! ```sh
//! cargo run --example architecture_sweep
//! ```

use quadglyph::classify::{architecture_sweep, features_to_batch, CcnSpec};
use quadglyph::dbn::{FinetuneConfig, PretrainConfig, TrainConfig};
use quadglyph::harness::synthcorpus::generate_corpus;
use quadglyph::quadtree::{build_decomposition_map, build_saliency_mask, featurize, RecurrenceMode};
use quadglyph::Result;

fn main() -> Result<()> {
    let (images, labels) = generate_corpus(900, 32, 17)?;
    let usize_labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let map = build_decomposition_map(&images[..600], 0.1, 2, RecurrenceMode::SplitCount)?;
    let mask = build_saliency_mask(&map, 0.05, 0.95)?;
    let features: Vec<Vec<f64>> = images
        .iter()
        .map(|img| featurize(img, &mask))
        .collect::<Result<_>>()?;
    let train = features_to_batch(&features[..600], &usize_labels[..600])?;
    let valid = features_to_batch(&features[600..750], &usize_labels[600..750])?;
    let test = features_to_batch(&features[750..], &usize_labels[750..])?;

    // A scaled-down grid in the spirit of the full two- and three-layer study.
    let train_cfg = TrainConfig {
        pretrain: PretrainConfig {
            epochs: 5,
            ..PretrainConfig::default()
        },
        finetune: FinetuneConfig {
            epochs: 100,
            patience: 20,
            ..FinetuneConfig::default()
        },
        seed: 2,
    };
    let specs: Vec<CcnSpec> = [vec![50, 50], vec![100, 100], vec![200, 200], vec![100, 100, 100]]
        .into_iter()
        .map(|architecture| CcnSpec {
            architecture,
            classes: 10,
            train_cfg: train_cfg.clone(),
        })
        .collect();

    println!("sweeping {} architectures on {} features ...", specs.len(), mask.feature_len());
    let rows = architecture_sweep(&specs, &train, &valid, &test)?;
    println!("{:<16} {:>9} {:>8} {:>6}", "architecture", "error %", "epochs", "best");
    for row in &rows {
        let arch = row
            .architecture
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-");
        println!(
            "{arch:<16} {:>9.2} {:>8} {:>6}",
            row.error_pct,
            row.epochs_run,
            if row.best { "*" } else { "" }
        );
    }
    Ok(())
}
