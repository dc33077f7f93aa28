//! Restricted Boltzmann machines and contrastive-divergence pretraining.

use ndarray::{Array1, Array2, Axis};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use super::{sigmoid_inplace, CdVariant, PretrainConfig};
use crate::error::{Error, Result};

/// Energy-based bipartite layer with logistic units.
#[derive(Debug, Clone, PartialEq)]
pub struct Rbm {
    /// `visible x hidden` weight matrix.
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
}

impl Rbm {
    /// Gaussian(0, 0.01) weights, zero hidden biases, and visible biases at
    /// the data log-odds so early reconstructions match the data marginals.
    fn init(data: &Array2<f64>, hidden: usize, rng: &mut StdRng) -> Rbm {
        let visible = data.ncols();
        let normal = Normal::new(0.0, 0.01).expect("valid normal");
        let means = data.mean_axis(Axis(0)).expect("nonempty data");
        let visible_bias = means.mapv(|p| {
            let p = p.clamp(1e-3, 1.0 - 1e-3);
            (p / (1.0 - p)).ln()
        });
        Rbm {
            weights: Array2::from_shape_fn((visible, hidden), |_| normal.sample(rng)),
            visible_bias,
            hidden_bias: Array1::zeros(hidden),
        }
    }

    pub fn visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.weights.ncols()
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().all(|v| v.is_finite())
            && self.visible_bias.iter().all(|v| v.is_finite())
            && self.hidden_bias.iter().all(|v| v.is_finite())
    }

    /// P(h = 1 | v) for a batch of visible rows.
    fn hidden_probs(&self, visible: &Array2<f64>) -> Array2<f64> {
        let mut a = visible.dot(&self.weights) + &self.hidden_bias;
        sigmoid_inplace(&mut a);
        a
    }

    /// P(v = 1 | h) for a batch of hidden rows.
    fn visible_probs(&self, hidden: &Array2<f64>) -> Array2<f64> {
        let mut a = hidden.dot(&self.weights.t()) + &self.visible_bias;
        sigmoid_inplace(&mut a);
        a
    }
}

fn bernoulli_sample(probs: &Array2<f64>, rng: &mut StdRng) -> Array2<f64> {
    probs.mapv(|p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 })
}

/// Snapshot passed to the pretraining observer after each parameter update.
pub struct ChainEvent<'a> {
    pub epoch: usize,
    pub batch_index: usize,
    /// Negative-phase state: persistent fantasy particles for P-CD, the last
    /// Gibbs reconstruction for CD-k.
    pub chain: &'a Array2<f64>,
    pub batch_data: &'a Array2<f64>,
}

pub struct RbmTrainOutput {
    pub rbm: Rbm,
    /// Mean one-step reconstruction error per epoch.
    pub epoch_errors: Vec<f64>,
}

/// Unsupervised RBM training with CD-k or persistent-chain CD.
pub fn rbm_pretrain(
    data: &Array2<f64>,
    visible: usize,
    hidden: usize,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<RbmTrainOutput> {
    rbm_pretrain_observed(data, visible, hidden, cfg, seed, |_| {})
}

/// [`rbm_pretrain`] with an observer invoked after every batch update;
/// instrumentation for chain-persistence checks.
pub fn rbm_pretrain_observed(
    data: &Array2<f64>,
    visible: usize,
    hidden: usize,
    cfg: &PretrainConfig,
    seed: u64,
    mut observer: impl FnMut(ChainEvent),
) -> Result<RbmTrainOutput> {
    if data.ncols() != visible {
        return Err(Error::InvalidInput(format!(
            "data has {} columns, expected {visible}",
            data.ncols()
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidInput("empty pretraining data".into()));
    }
    if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidInput("pretraining data outside [0, 1]".into()));
    }
    if hidden == 0 {
        return Err(Error::InvalidInput("hidden size must be >= 1".into()));
    }

    let mut rng = StdRng::seed_from_u64(seed);
    let mut rbm = Rbm::init(data, hidden, &mut rng);

    let n = data.nrows();
    let lr = cfg.learning_rate;
    let mut epoch_errors = Vec::with_capacity(cfg.epochs);

    // Persistent fantasy particles, sampled states only.
    let mut persistent: Option<Array2<f64>> = match cfg.cd_variant {
        CdVariant::PersistentCd { chains } => Some(Array2::from_shape_fn(
            (chains, visible),
            |_| if rng.gen::<f64>() < 0.5 { 1.0 } else { 0.0 },
        )),
        CdVariant::CdK { .. } => None,
    };

    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        // Fisher-Yates with the training rng keeps runs reproducible.
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        let mut err_sum = 0.0;
        let mut err_batches = 0usize;

        for (batch_index, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch = data.select(Axis(0), chunk);
            let m = batch.nrows() as f64;

            let ph0 = rbm.hidden_probs(&batch);
            let h0 = bernoulli_sample(&ph0, &mut rng);

            // One-step reconstruction for the epoch monitor.
            let pv1 = rbm.visible_probs(&h0);
            err_sum += (&batch - &pv1).mapv(|d| d * d).mean().unwrap_or(0.0);
            err_batches += 1;

            let positive = batch.t().dot(&ph0);

            let (neg_v, neg_h, neg_scale) = match cfg.cd_variant {
                CdVariant::CdK { k } => {
                    let mut h = h0;
                    let mut pv = pv1.clone();
                    for step in 0..k {
                        if step > 0 {
                            pv = rbm.visible_probs(&h);
                        }
                        let ph = rbm.hidden_probs(&pv);
                        if step + 1 < k {
                            h = bernoulli_sample(&ph, &mut rng);
                        } else {
                            h = ph;
                        }
                    }
                    (pv, h, m)
                }
                CdVariant::PersistentCd { .. } => {
                    let chain = persistent.as_mut().expect("persistent state exists");
                    let ph = rbm.hidden_probs(chain);
                    let hs = bernoulli_sample(&ph, &mut rng);
                    let pv = rbm.visible_probs(&hs);
                    *chain = bernoulli_sample(&pv, &mut rng);
                    let ph_after = rbm.hidden_probs(chain);
                    (chain.clone(), ph_after, chain.nrows() as f64)
                }
            };

            let negative = neg_v.t().dot(&neg_h);
            rbm.weights += &((&positive / m - &negative / neg_scale) * lr);
            let dvb = batch.sum_axis(Axis(0)) / m - neg_v.sum_axis(Axis(0)) / neg_scale;
            rbm.visible_bias += &(dvb * lr);
            let dhb = ph0.sum_axis(Axis(0)) / m - neg_h.sum_axis(Axis(0)) / neg_scale;
            rbm.hidden_bias += &(dhb * lr);

            if !rbm.is_finite() {
                return Err(Error::TrainingDiverged(format!(
                    "non-finite RBM parameter at epoch {epoch}, batch {batch_index}"
                )));
            }

            let chain_view = match &persistent {
                Some(chain) => chain,
                None => &neg_v,
            };
            observer(ChainEvent {
                epoch,
                batch_index,
                chain: chain_view,
                batch_data: &batch,
            });
        }
        epoch_errors.push(err_sum / err_batches.max(1) as f64);
    }

    Ok(RbmTrainOutput { rbm, epoch_errors })
}

/// Mean hidden activation of every input row: `sigmoid(x W + b_h)`.
/// Deterministic mean-field transform, no sampling.
pub fn rbm_transform(rbm: &Rbm, data: &Array2<f64>) -> Array2<f64> {
    rbm.hidden_probs(data)
}
