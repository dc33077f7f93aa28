//! Character classification: quadtree feature vectors in, class posteriors
//! out, plus the architecture-sweep machinery.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dbn::{
    dbn_finetune, dbn_predict, dbn_pretrain, DbnModel, LabeledBatch, TrainConfig,
};
use crate::error::{Error, Result};
use crate::noise::NoiseKind;
use crate::seeding::derive_seed;

/// Classification network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcnSpec {
    /// Hidden layer sizes, e.g. `[500, 500]`.
    pub architecture: Vec<usize>,
    pub classes: usize,
    pub train_cfg: TrainConfig,
}

impl CcnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.architecture.is_empty() {
            return Err(Error::Config("CCN architecture must be nonempty".into()));
        }
        if self.classes < 2 {
            return Err(Error::Config("CCN needs >= 2 classes".into()));
        }
        self.train_cfg.validate()
    }
}

/// Per-noise-type winners of the architecture study: awgn and motion favor
/// two hidden layers (500 and 300 wide), reduced contrast three 500-wide
/// layers.
pub fn default_architecture(noise: NoiseKind) -> Vec<usize> {
    match noise {
        NoiseKind::Awgn => vec![500, 500],
        NoiseKind::Motion => vec![300, 300],
        NoiseKind::Contrast => vec![500, 500, 500],
    }
}

/// The default sweep grid: two hidden layers of
/// {100, 200, 300, 400, 500, 1000} units and three hidden layers of
/// {100, 300, 500, 1000} units.
pub fn default_sweep_grid() -> Vec<Vec<usize>> {
    let mut grid: Vec<Vec<usize>> = [100, 200, 300, 400, 500, 1000]
        .iter()
        .map(|&n| vec![n, n])
        .collect();
    grid.extend([100, 300, 500, 1000].iter().map(|&n| vec![n, n, n]));
    grid
}

/// Builds a labeled batch from per-sample feature vectors, rejecting ragged
/// lengths.
pub fn features_to_batch(features: &[Vec<f64>], labels: &[usize]) -> Result<LabeledBatch> {
    let first = features
        .first()
        .ok_or_else(|| Error::InvalidInput("empty feature set".into()))?
        .len();
    if features.iter().any(|f| f.len() != first) {
        return Err(Error::InvalidInput(
            "feature vectors have mismatched lengths".into(),
        ));
    }
    let mut inputs = Array2::zeros((features.len(), first));
    for (i, f) in features.iter().enumerate() {
        for (j, &v) in f.iter().enumerate() {
            inputs[[i, j]] = v;
        }
    }
    LabeledBatch::new(inputs, labels.to_vec())
}

pub struct CcnTrainOutput {
    pub model: DbnModel,
    pub epochs_run: usize,
    pub validation_error: f64,
}

/// Pretrains and fine-tunes the classification network.
pub fn train_ccn(
    train: &LabeledBatch,
    valid: &LabeledBatch,
    spec: &CcnSpec,
) -> Result<CcnTrainOutput> {
    spec.validate()?;
    if train.inputs.ncols() != valid.inputs.ncols() {
        return Err(Error::InvalidInput(
            "train/valid feature widths differ".into(),
        ));
    }
    if let Some(&bad) = train
        .labels
        .iter()
        .chain(valid.labels.iter())
        .find(|&&y| y >= spec.classes)
    {
        return Err(Error::InvalidInput(format!(
            "label {bad} out of range for {} classes",
            spec.classes
        )));
    }
    let model = dbn_pretrain(&train.inputs, &spec.architecture, spec.classes, &spec.train_cfg)?;
    let out = dbn_finetune(
        &model,
        train,
        valid,
        &spec.train_cfg.finetune,
        derive_seed(spec.train_cfg.seed, "ccn-finetune"),
    )?;
    let validation_error = crate::dbn::error_rate(&out.model, valid);
    Ok(CcnTrainOutput {
        model: out.model,
        epochs_run: out.epochs_run,
        validation_error,
    })
}

/// Evaluation outcome: error percentage, confusion matrix, per-class errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub error_pct: f64,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<u32>>,
    pub per_class_error: Vec<f64>,
    pub total: usize,
}

/// Deterministic evaluation over a test batch.
pub fn evaluate(model: &DbnModel, test: &LabeledBatch) -> Result<EvalResult> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test set".into()));
    }
    if test.inputs.ncols() != model.input_len() {
        return Err(Error::InvalidInput(format!(
            "test feature width {} does not match model input {}",
            test.inputs.ncols(),
            model.input_len()
        )));
    }
    let classes = model.classes();
    let (pred, _) = dbn_predict(model, &test.inputs);
    let mut confusion = vec![vec![0u32; classes]; classes];
    for (&p, &y) in pred.iter().zip(&test.labels) {
        if y >= classes {
            return Err(Error::InvalidInput(format!(
                "label {y} out of range for {classes} classes"
            )));
        }
        confusion[y][p] += 1;
    }
    let total = test.len();
    let correct: u32 = (0..classes).map(|c| confusion[c][c]).sum();
    let error_pct = 100.0 * (1.0 - correct as f64 / total as f64);
    let per_class_error = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let n: u32 = row.iter().sum();
            if n == 0 {
                0.0
            } else {
                100.0 * (1.0 - row[c] as f64 / n as f64)
            }
        })
        .collect();
    Ok(EvalResult {
        error_pct,
        confusion,
        per_class_error,
        total,
    })
}

/// One sweep entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub architecture: Vec<usize>,
    pub error_pct: f64,
    pub epochs_run: usize,
    pub best: bool,
}

/// Trains and evaluates every spec under a common seed policy (the spec seed
/// salted with the architecture), returning rows sorted by error with the
/// best flagged.
pub fn architecture_sweep(
    specs: &[CcnSpec],
    train: &LabeledBatch,
    valid: &LabeledBatch,
    test: &LabeledBatch,
) -> Result<Vec<SweepRow>> {
    if specs.is_empty() {
        return Err(Error::InvalidInput("sweep needs >= 1 spec".into()));
    }
    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let arch_tag: Vec<String> = spec.architecture.iter().map(|n| n.to_string()).collect();
        let mut salted = spec.clone();
        salted.train_cfg.seed = derive_seed(spec.train_cfg.seed, &format!("sweep-{}", arch_tag.join("-")));
        let out = train_ccn(train, valid, &salted)?;
        let eval = evaluate(&out.model, test)?;
        rows.push(SweepRow {
            architecture: spec.architecture.clone(),
            error_pct: eval.error_pct,
            epochs_run: out.epochs_run,
            best: false,
        });
    }
    rows.sort_by(|a, b| a.error_pct.partial_cmp(&b.error_pct).unwrap());
    if let Some(first) = rows.first_mut() {
        first.best = true;
    }
    Ok(rows)
}

/// Rejection threshold hook for the two-pass (higher-resolution) scheme:
/// samples whose pass-one max posterior falls below the threshold take the
/// pass-two prediction instead.
pub fn evaluate_two_pass(
    first: &DbnModel,
    first_features: &LabeledBatch,
    second: &DbnModel,
    second_features: &LabeledBatch,
    reject_threshold: f64,
) -> Result<EvalResult> {
    if first_features.len() != second_features.len() {
        return Err(Error::InvalidInput(
            "two-pass feature sets must align sample-for-sample".into(),
        ));
    }
    let classes = first.classes();
    if classes != second.classes() {
        return Err(Error::InvalidInput("two-pass models disagree on classes".into()));
    }
    let (p1, probs1) = dbn_predict(first, &first_features.inputs);
    let (p2, _) = dbn_predict(second, &second_features.inputs);

    let mut confusion = vec![vec![0u32; classes]; classes];
    let mut rejected = 0usize;
    for i in 0..first_features.len() {
        let max_p = probs1.row(i).iter().cloned().fold(f64::MIN, f64::max);
        let pred = if max_p < reject_threshold {
            rejected += 1;
            p2[i]
        } else {
            p1[i]
        };
        confusion[first_features.labels[i]][pred] += 1;
    }
    let total = first_features.len();
    let correct: u32 = (0..classes).map(|c| confusion[c][c]).sum();
    let per_class_error = confusion
        .iter()
        .enumerate()
        .map(|(c, row)| {
            let n: u32 = row.iter().sum();
            if n == 0 {
                0.0
            } else {
                100.0 * (1.0 - row[c] as f64 / n as f64)
            }
        })
        .collect();
    let _ = rejected;
    Ok(EvalResult {
        error_pct: 100.0 * (1.0 - correct as f64 / total as f64),
        confusion,
        per_class_error,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbn::{model_to_bytes, FinetuneConfig, PretrainConfig};
    use ndarray::Array2;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn quick_cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            pretrain: PretrainConfig {
                epochs: 2,
                ..PretrainConfig::default()
            },
            finetune: FinetuneConfig {
                epochs: 200,
                learning_rate: 0.5,
                dropout_p: 0.0,
                l1: 0.0,
                l2: 0.0,
                batch_size: 16,
                patience: 200,
            },
            seed,
        }
    }

    /// Two separable clusters in feature space, like constant-vs-checkerboard
    /// quadtree vectors.
    fn separable_batches(seed: u64, dim: usize) -> (LabeledBatch, LabeledBatch) {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut make = |n: usize| {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..n {
                let class = rng.gen_range(0..2usize);
                let base = if class == 0 { 0.15 } else { 0.85 };
                rows.push(
                    (0..dim)
                        .map(|_| (base + rng.gen_range(-0.1..0.1f64)).clamp(0.0, 1.0))
                        .collect::<Vec<f64>>(),
                );
                labels.push(class);
            }
            features_to_batch(&rows, &labels).unwrap()
        };
        (make(40), make(12))
    }

    #[test]
    fn separable_features_reach_zero_error() {
        let (train, valid) = separable_batches(3, 5);
        let spec = CcnSpec {
            architecture: vec![8],
            classes: 2,
            train_cfg: quick_cfg(4),
        };
        let out = train_ccn(&train, &valid, &spec).unwrap();
        let eval = evaluate(&out.model, &valid).unwrap();
        assert_eq!(eval.error_pct, 0.0);
        assert!(out.epochs_run <= 200);
    }

    #[test]
    fn zero_epochs_guesses_uniformly() {
        // Balanced 4-class data; an untrained zero-head model predicts class 0
        // everywhere, so the error is exactly (1 - 1/C) * 100.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut rng = StdRng::seed_from_u64(8);
        for i in 0..40 {
            rows.push((0..6).map(|_| rng.gen::<f64>()).collect::<Vec<f64>>());
            labels.push(i % 4);
        }
        let batch = features_to_batch(&rows, &labels).unwrap();
        let spec = CcnSpec {
            architecture: vec![5],
            classes: 4,
            train_cfg: TrainConfig {
                pretrain: PretrainConfig {
                    epochs: 0,
                    ..PretrainConfig::default()
                },
                finetune: FinetuneConfig {
                    epochs: 0,
                    ..FinetuneConfig::default()
                },
                seed: 2,
            },
        };
        let out = train_ccn(&batch, &batch, &spec).unwrap();
        let eval = evaluate(&out.model, &batch).unwrap();
        assert!((eval.error_pct - 75.0).abs() < 1e-9);
    }

    #[test]
    fn identical_config_yields_identical_model_bytes() {
        let (train, valid) = separable_batches(5, 4);
        let spec = CcnSpec {
            architecture: vec![6],
            classes: 2,
            train_cfg: quick_cfg(99),
        };
        let a = train_ccn(&train, &valid, &spec).unwrap();
        let b = train_ccn(&train, &valid, &spec).unwrap();
        assert_eq!(
            model_to_bytes(&a.model, &spec.train_cfg),
            model_to_bytes(&b.model, &spec.train_cfg)
        );
    }

    #[test]
    fn ragged_features_rejected() {
        let features = vec![vec![0.0, 1.0], vec![0.5]];
        assert!(features_to_batch(&features, &[0, 1]).is_err());
    }

    #[test]
    fn evaluate_perfect_and_constant_predictors() {
        // Constant predictor: zero model always answers class 0.
        let model = DbnModel {
            hidden: vec![crate::dbn::Layer {
                weights: Array2::zeros((3, 2)),
                bias: ndarray::Array1::zeros(2),
            }],
            output: crate::dbn::Layer {
                weights: Array2::zeros((2, 10)),
                bias: ndarray::Array1::zeros(10),
            },
        };
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            rows.push(vec![0.1, 0.2, 0.3]);
            labels.push(i % 10);
        }
        let batch = features_to_batch(&rows, &labels).unwrap();
        let eval = evaluate(&model, &batch).unwrap();
        assert!((eval.error_pct - 90.0).abs() < 1e-9);

        // Independent re-derivation of error from the emitted confusion.
        let total: u32 = eval.confusion.iter().flatten().sum();
        let trace: u32 = (0..10).map(|c| eval.confusion[c][c]).sum();
        let re_derived = 100.0 * (1.0 - trace as f64 / total as f64);
        assert_eq!(re_derived, eval.error_pct);
        assert_eq!(total as usize, eval.total);

        // Row sums equal per-class counts.
        for (c, row) in eval.confusion.iter().enumerate() {
            let n: u32 = row.iter().sum();
            assert_eq!(n, labels.iter().filter(|&&y| y == c).count() as u32);
        }
    }

    #[test]
    fn sweep_single_spec_matches_evaluate_and_orders_pairs() {
        let (train, valid) = separable_batches(7, 4);
        let good = CcnSpec {
            architecture: vec![8],
            classes: 2,
            train_cfg: quick_cfg(1),
        };
        // A deliberately crippled sibling: zero epochs of anything.
        let bad = CcnSpec {
            architecture: vec![2],
            classes: 2,
            train_cfg: TrainConfig {
                pretrain: PretrainConfig {
                    epochs: 0,
                    ..PretrainConfig::default()
                },
                finetune: FinetuneConfig {
                    epochs: 0,
                    ..FinetuneConfig::default()
                },
                seed: 1,
            },
        };

        let single = architecture_sweep(std::slice::from_ref(&good), &train, &valid, &valid).unwrap();
        assert_eq!(single.len(), 1);
        assert!(single[0].best);

        let rows = architecture_sweep(&[bad, good], &train, &valid, &valid).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error_pct <= rows[1].error_pct);
        assert_eq!(rows[0].architecture, vec![8]);
        assert!(rows[0].best && !rows[1].best);
    }

    #[test]
    fn default_grid_matches_study_table() {
        let grid = default_sweep_grid();
        assert_eq!(grid.len(), 10);
        assert!(grid.contains(&vec![100, 100]));
        assert!(grid.contains(&vec![1000, 1000]));
        assert!(grid.contains(&vec![500, 500, 500]));
        assert_eq!(default_architecture(NoiseKind::Awgn), vec![500, 500]);
        assert_eq!(default_architecture(NoiseKind::Motion), vec![300, 300]);
        assert_eq!(default_architecture(NoiseKind::Contrast), vec![500, 500, 500]);
    }

    #[test]
    fn two_pass_rescues_rejected_samples() {
        // First model is uniform (always rejects at threshold 0.6); second is
        // a perfect-margin head keyed directly to the label encoded in the
        // feature.
        let uniform = DbnModel {
            hidden: vec![crate::dbn::Layer {
                weights: Array2::zeros((1, 2)),
                bias: ndarray::Array1::zeros(2),
            }],
            output: crate::dbn::Layer {
                weights: Array2::zeros((2, 2)),
                bias: ndarray::Array1::zeros(2),
            },
        };
        let mut sharp = uniform.clone();
        sharp.hidden[0].weights[[0, 0]] = 60.0;
        sharp.hidden[0].bias[0] = -30.0;
        sharp.output.weights[[0, 0]] = -40.0;
        sharp.output.weights[[0, 1]] = 40.0;
        sharp.output.bias[0] = 20.0;
        sharp.output.bias[1] = -20.0;

        let rows = vec![vec![0.0], vec![1.0], vec![0.0], vec![1.0]];
        let labels = vec![0, 1, 0, 1];
        let batch = features_to_batch(&rows, &labels).unwrap();
        let one_pass = evaluate(&uniform, &batch).unwrap();
        assert!(one_pass.error_pct > 0.0);
        let two_pass = evaluate_two_pass(&uniform, &batch, &sharp, &batch, 0.6).unwrap();
        assert_eq!(two_pass.error_pct, 0.0);
    }
}
