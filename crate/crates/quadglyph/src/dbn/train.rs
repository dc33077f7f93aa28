//! Forward pass, negative log-likelihood, backpropagation and fine-tuning.

use ndarray::{Array1, Array2, Axis};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::{sigmoid_inplace, softmax, DbnModel, FinetuneConfig, LabeledBatch, Layer};
use crate::error::{Error, Result};

const LOG_FLOOR: f64 = 1e-300;

struct ForwardCache {
    /// `inputs[l]` feeds layer `l`; the last entry feeds the softmax head.
    inputs: Vec<Array2<f64>>,
    /// Pre-dropout sigmoid outputs per hidden layer.
    sigmoids: Vec<Array2<f64>>,
    /// Inverted-dropout masks (0 or 1/(1-p)) per hidden layer, training only.
    masks: Option<Vec<Array2<f64>>>,
    probs: Array2<f64>,
}

fn forward(model: &DbnModel, x: &Array2<f64>, dropout: Option<(f64, &mut StdRng)>) -> ForwardCache {
    let mut inputs = Vec::with_capacity(model.hidden.len() + 1);
    let mut sigmoids = Vec::with_capacity(model.hidden.len());
    let mut masks = dropout.as_ref().map(|_| Vec::with_capacity(model.hidden.len()));
    let mut dropout = dropout;

    inputs.push(x.clone());
    for layer in &model.hidden {
        let current = inputs.last().expect("at least the input");
        let mut a = current.dot(&layer.weights) + &layer.bias;
        sigmoid_inplace(&mut a);
        sigmoids.push(a.clone());
        if let Some((p, rng)) = dropout.as_mut() {
            let keep = 1.0 - *p;
            let mask = Array2::from_shape_fn(a.dim(), |_| {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            a *= &mask;
            masks.as_mut().expect("masks allocated").push(mask);
        }
        inputs.push(a);
    }
    let logits = inputs.last().expect("nonempty").dot(&model.output.weights) + &model.output.bias;
    ForwardCache {
        probs: softmax(&logits),
        inputs,
        sigmoids,
        masks,
    }
}

/// Class posteriors for a batch of inputs (inference path, no dropout).
pub fn class_probabilities(model: &DbnModel, inputs: &Array2<f64>) -> Array2<f64> {
    forward(model, inputs, None).probs
}

/// Argmax class per row (ties break to the lowest index) plus the posterior
/// rows.
pub fn dbn_predict(model: &DbnModel, inputs: &Array2<f64>) -> (Vec<usize>, Array2<f64>) {
    let probs = class_probabilities(model, inputs);
    let classes = probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_p = row[0];
            for (i, &p) in row.iter().enumerate().skip(1) {
                if p > best_p {
                    best_p = p;
                    best = i;
                }
            }
            best
        })
        .collect();
    (classes, probs)
}

/// Negative log-likelihood of the labels (Eq.-style sum over the batch) and
/// the per-sample log-likelihoods. Probabilities are floored at 1e-300.
pub fn nll_loss(model: &DbnModel, batch: &LabeledBatch) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("nll_loss on empty batch".into()));
    }
    check_batch(model, batch)?;
    let probs = class_probabilities(model, &batch.inputs);
    let lls: Vec<f64> = batch
        .labels
        .iter()
        .enumerate()
        .map(|(i, &y)| probs[[i, y]].max(LOG_FLOOR).ln())
        .collect();
    Ok((-lls.iter().sum::<f64>(), lls))
}

fn weight_penalty(model: &DbnModel, l1: f64, l2: f64) -> f64 {
    let mut p = 0.0;
    for layer in model.hidden.iter().chain(std::iter::once(&model.output)) {
        if l1 > 0.0 {
            p += l1 * layer.weights.iter().map(|w| w.abs()).sum::<f64>();
        }
        if l2 > 0.0 {
            p += l2 * layer.weights.iter().map(|w| w * w).sum::<f64>();
        }
    }
    p
}

/// The objective minimized by fine-tuning: mean NLL over the batch plus
/// `l1 * |M|_1 + l2 * |M|_2^2` over all weight matrices (biases unpenalized).
pub fn training_objective(model: &DbnModel, batch: &LabeledBatch, l1: f64, l2: f64) -> Result<f64> {
    let (j, _) = nll_loss(model, batch)?;
    Ok(j / batch.len() as f64 + weight_penalty(model, l1, l2))
}

/// Parameter gradients, shaped like the model.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub hidden: Vec<Layer>,
    pub output: Layer,
}

fn regularized(weights: &Array2<f64>, grad: Array2<f64>, l1: f64, l2: f64) -> Array2<f64> {
    if l1 == 0.0 && l2 == 0.0 {
        return grad;
    }
    let mut g = grad;
    azip_reg(&mut g, weights, l1, l2);
    g
}

fn azip_reg(g: &mut Array2<f64>, w: &Array2<f64>, l1: f64, l2: f64) {
    ndarray::Zip::from(g).and(w).for_each(|g, &w| {
        *g += l1 * w.signum() + 2.0 * l2 * w;
    });
}

fn backward(
    model: &DbnModel,
    cache: &ForwardCache,
    labels: &[usize],
    l1: f64,
    l2: f64,
) -> Gradients {
    let n = labels.len() as f64;
    let mut dlogits = cache.probs.clone();
    for (i, &y) in labels.iter().enumerate() {
        dlogits[[i, y]] -= 1.0;
    }
    dlogits /= n;

    let last_input = cache.inputs.last().expect("nonempty");
    let g_output = Layer {
        weights: regularized(
            &model.output.weights,
            last_input.t().dot(&dlogits),
            l1,
            l2,
        ),
        bias: dlogits.sum_axis(Axis(0)),
    };

    let mut delta = dlogits.dot(&model.output.weights.t());
    let mut g_hidden = vec![
        Layer {
            weights: Array2::zeros((0, 0)),
            bias: Array1::zeros(0),
        };
        model.hidden.len()
    ];
    for l in (0..model.hidden.len()).rev() {
        if let Some(masks) = &cache.masks {
            delta *= &masks[l];
        }
        let s = &cache.sigmoids[l];
        ndarray::Zip::from(&mut delta).and(s).for_each(|d, &a| {
            *d *= a * (1.0 - a);
        });
        g_hidden[l] = Layer {
            weights: regularized(
                &model.hidden[l].weights,
                cache.inputs[l].t().dot(&delta),
                l1,
                l2,
            ),
            bias: delta.sum_axis(Axis(0)),
        };
        if l > 0 {
            delta = delta.dot(&model.hidden[l].weights.t());
        }
    }
    Gradients {
        hidden: g_hidden,
        output: g_output,
    }
}

/// Analytic gradients of [`training_objective`] (no dropout); the oracle
/// surface for finite-difference checks.
pub fn analytic_gradients(
    model: &DbnModel,
    batch: &LabeledBatch,
    l1: f64,
    l2: f64,
) -> Result<Gradients> {
    check_batch(model, batch)?;
    let cache = forward(model, &batch.inputs, None);
    Ok(backward(model, &cache, &batch.labels, l1, l2))
}

fn check_batch(model: &DbnModel, batch: &LabeledBatch) -> Result<()> {
    if batch.inputs.ncols() != model.input_len() {
        return Err(Error::InvalidInput(format!(
            "feature width {} does not match model input {}",
            batch.inputs.ncols(),
            model.input_len()
        )));
    }
    let classes = model.classes();
    if let Some(&bad) = batch.labels.iter().find(|&&y| y >= classes) {
        return Err(Error::InvalidInput(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    Ok(())
}

/// Misclassification rate of the model on a batch.
pub fn error_rate(model: &DbnModel, batch: &LabeledBatch) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let (pred, _) = dbn_predict(model, &batch.inputs);
    let wrong = pred
        .iter()
        .zip(&batch.labels)
        .filter(|(p, y)| p != y)
        .count();
    wrong as f64 / batch.len() as f64
}

pub struct FinetuneOutput {
    /// Parameters at the best validation error seen.
    pub model: DbnModel,
    pub epochs_run: usize,
    /// Per-epoch (mean train objective, validation error).
    pub history: Vec<(f64, f64)>,
}

/// Supervised fine-tuning: minibatch SGD on the NLL objective with L1/L2
/// penalties and inverted dropout on the hidden layers. Early-stops on
/// validation error and returns the best-validation parameters.
pub fn dbn_finetune(
    model: &DbnModel,
    train: &LabeledBatch,
    valid: &LabeledBatch,
    cfg: &FinetuneConfig,
    seed: u64,
) -> Result<FinetuneOutput> {
    if train.is_empty() || valid.is_empty() {
        return Err(Error::InvalidInput("fine-tuning needs nonempty train and valid sets".into()));
    }
    check_batch(model, train)?;
    check_batch(model, valid)?;

    let mut rng = StdRng::seed_from_u64(seed);
    let mut current = model.clone();
    let mut best = model.clone();
    let mut best_err = error_rate(&current, valid);
    let mut bad_epochs = 0usize;
    let mut history = Vec::new();
    let mut epochs_run = 0usize;

    let n = train.len();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let inputs = train.inputs.select(Axis(0), chunk);
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();

            let cache = if cfg.dropout_p > 0.0 {
                forward(&current, &inputs, Some((cfg.dropout_p, &mut rng)))
            } else {
                forward(&current, &inputs, None)
            };
            let batch_loss: f64 = labels
                .iter()
                .enumerate()
                .map(|(i, &y)| -cache.probs[[i, y]].max(LOG_FLOOR).ln())
                .sum::<f64>()
                / labels.len() as f64;
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            loss_sum += batch_loss;
            batches += 1;

            let grads = backward(&current, &cache, &labels, cfg.l1, cfg.l2);
            let lr = cfg.learning_rate;
            for (layer, g) in current.hidden.iter_mut().zip(&grads.hidden) {
                layer.weights.scaled_add(-lr, &g.weights);
                layer.bias.scaled_add(-lr, &g.bias);
            }
            current.output.weights.scaled_add(-lr, &grads.output.weights);
            current.output.bias.scaled_add(-lr, &grads.output.bias);
        }
        if !current.is_finite() {
            return Err(Error::TrainingDiverged(format!(
                "non-finite parameter at epoch {epoch}"
            )));
        }

        let valid_err = error_rate(&current, valid);
        history.push((loss_sum / batches.max(1) as f64, valid_err));
        epochs_run = epoch + 1;
        if valid_err < best_err {
            best_err = valid_err;
            best = current.clone();
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs > cfg.patience {
                break;
            }
        }
    }

    Ok(FinetuneOutput {
        model: best,
        epochs_run,
        history,
    })
}
