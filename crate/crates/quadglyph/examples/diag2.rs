// Temporary: inspect pretrained layer activations. Removed before release.

use ndarray::{Array2, Axis};
use quadglyph::dbn::{dbn_pretrain, rbm_pretrain, rbm_transform, PretrainConfig, TrainConfig};
use quadglyph::harness::corpus::FeatureSet;

fn stats(tag: &str, a: &Array2<f64>) {
    let mean = a.mean().unwrap();
    let per_unit_std = a.std_axis(Axis(0), 0.0);
    let avg_std = per_unit_std.mean().unwrap();
    let max_std = per_unit_std.iter().cloned().fold(0.0f64, f64::max);
    println!("{tag:>12}: mean {mean:.4}  avg-unit-std {avg_std:.4}  max-unit-std {max_std:.4}");
}

fn main() {
    let dir = "/tmp/smoke3/stages/features-awgn-32";
    let train = FeatureSet::load(format!("{dir}/train.qgf").as_ref()).unwrap().to_batch().unwrap();
    stats("input", &train.inputs);

    for epochs in [5usize, 30] {
        println!("--- pretrain epochs {epochs}");
        let prec = PretrainConfig { epochs, ..PretrainConfig::default() };
        let r1 = rbm_pretrain(&train.inputs, 35, 100, &prec, 1).unwrap();
        let t1 = rbm_transform(&r1.rbm, &train.inputs);
        stats("layer1", &t1);
        println!("  rbm1 recon err: first {:.4} last {:.4}; |W| max {:.3}, hb mean {:.3}, hb min {:.3}",
            r1.epoch_errors[0], r1.epoch_errors.last().unwrap(),
            r1.rbm.weights.iter().fold(0.0f64, |m, w| m.max(w.abs())),
            r1.rbm.hidden_bias.mean().unwrap(),
            r1.rbm.hidden_bias.iter().cloned().fold(f64::INFINITY, f64::min));
        let r2 = rbm_pretrain(&t1, 100, 100, &prec, 2).unwrap();
        let t2 = rbm_transform(&r2.rbm, &t1);
        stats("layer2", &t2);
    }

    // Compare: what does the full dbn_pretrain give (zero-epoch Xavier)?
    let cfg = TrainConfig { pretrain: PretrainConfig { epochs: 0, ..PretrainConfig::default() }, seed: 1, ..TrainConfig::default() };
    let model = dbn_pretrain(&train.inputs, &[100, 100], 10, &cfg).unwrap();
    let mut a = train.inputs.clone();
    for (i, layer) in model.hidden.iter().enumerate() {
        a = a.dot(&layer.weights) + &layer.bias;
        a.mapv_inplace(|z| 1.0 / (1.0 + (-z).exp()));
        stats(&format!("xavier-l{}", i + 1), &a);
    }
}
