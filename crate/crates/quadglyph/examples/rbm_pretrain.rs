//! Train a single RBM on the bars-and-stripes toy set and watch the
//! reconstruction error fall, with both contrastive-divergence variants.
//!
//! ```sh
//! cargo run --example rbm_pretrain
//! ```

use ndarray::Array2;
use quadglyph::dbn::{rbm_pretrain, rbm_transform, CdVariant, PretrainConfig};
use quadglyph::Result;

/// All 4x4 patterns whose rows (or columns) are constant.
fn bars_and_stripes() -> Array2<f64> {
    let mut rows = Vec::new();
    for pattern in 0..16u8 {
        let mut by_row = [0.0f64; 16];
        let mut by_col = [0.0f64; 16];
        for i in 0..4 {
            let bit = ((pattern >> i) & 1) as f64;
            for j in 0..4 {
                by_row[i * 4 + j] = bit;
                by_col[j * 4 + i] = bit;
            }
        }
        rows.push(by_row);
        rows.push(by_col);
    }
    let flat: Vec<f64> = rows.concat();
    Array2::from_shape_vec((32, 16), flat).expect("consistent shape")
}

fn main() -> Result<()> {
    let data = bars_and_stripes();
    println!("bars-and-stripes: {} samples x {} visibles\n", data.nrows(), data.ncols());

    for variant in [CdVariant::CdK { k: 1 }, CdVariant::PersistentCd { chains: 16 }] {
        let cfg = PretrainConfig {
            epochs: 200,
            learning_rate: 0.1,
            cd_variant: variant,
            batch_size: 8,
        };
        let out = rbm_pretrain(&data, 16, 12, &cfg, 7)?;
        let errs = &out.epoch_errors;
        println!("{variant:?}");
        for epoch in [0, 49, 99, 199] {
            println!("  epoch {:>3}: reconstruction error {:.5}", epoch + 1, errs[epoch]);
        }
        let hidden = rbm_transform(&out.rbm, &data);
        let mean = hidden.mean().unwrap_or(0.0);
        println!("  mean hidden activation: {mean:.3}\n");
    }
    Ok(())
}
