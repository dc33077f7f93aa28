//! Greedy pretraining plus supervised fine-tuning of a DBN classifier on
//! quadtree features of synthetic digits.
//!
//! ```sh
//! cargo run --example dbn_classifier
//! ```

use quadglyph::classify::{evaluate, features_to_batch, train_ccn, CcnSpec};
use quadglyph::dbn::{FinetuneConfig, PretrainConfig, TrainConfig};
use quadglyph::harness::synthcorpus::generate_corpus;
use quadglyph::quadtree::{build_decomposition_map, build_saliency_mask, featurize, RecurrenceMode};
use quadglyph::Result;

fn main() -> Result<()> {
    let (images, labels) = generate_corpus(1200, 32, 3)?;
    let usize_labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();

    // Features: saliency-pruned quadtree block means fitted on the train part.
    let map = build_decomposition_map(&images[..900], 0.1, 2, RecurrenceMode::SplitCount)?;
    let mask = build_saliency_mask(&map, 0.05, 0.95)?;
    println!("{} features per image (raw 1024)", mask.feature_len());
    let features: Vec<Vec<f64>> = images
        .iter()
        .map(|img| featurize(img, &mask))
        .collect::<Result<_>>()?;

    let train = features_to_batch(&features[..900], &usize_labels[..900])?;
    let valid = features_to_batch(&features[900..1050], &usize_labels[900..1050])?;
    let test = features_to_batch(&features[1050..], &usize_labels[1050..])?;

    let spec = CcnSpec {
        architecture: vec![150, 150],
        classes: 10,
        train_cfg: TrainConfig {
            pretrain: PretrainConfig {
                epochs: 10,
                ..PretrainConfig::default()
            },
            finetune: FinetuneConfig {
                epochs: 120,
                patience: 25,
                ..FinetuneConfig::default()
            },
            seed: 5,
        },
    };
    println!("training {:?} ...", spec.architecture);
    let out = train_ccn(&train, &valid, &spec)?;
    println!(
        "fine-tuned for {} epochs, validation error {:.2}%",
        out.epochs_run,
        100.0 * out.validation_error
    );

    let eval = evaluate(&out.model, &test)?;
    println!("test error: {:.2}% over {} samples", eval.error_pct, eval.total);
    println!("per-class error (%): {:?}", eval
        .per_class_error
        .iter()
        .map(|e| (e * 10.0).round() / 10.0)
        .collect::<Vec<_>>());
    Ok(())
}
