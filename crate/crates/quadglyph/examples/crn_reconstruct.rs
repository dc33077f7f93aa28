//! Train the per-pixel reconstruction network on a small noisy corpus and
//! reconstruct held-out digits, writing noisy | reconstruction | ground-truth
//! triptychs.
//!
//! ```sh
//! cargo run --example crn_reconstruct
//! ```

use quadglyph::dbn::{FinetuneConfig, PretrainConfig, TrainConfig};
use quadglyph::harness::synthcorpus::render_digit;
use quadglyph::noise::{apply_noise, NoiseSpec};
use quadglyph::raster::{binarize, io::write_pgm, GrayImage};
use quadglyph::reconstruct::{
    build_pixel_pool, pixel_metrics, reconstruct, train_crn, CrnSamplingPlan, FilterBankSource,
    PoolSource,
};
use quadglyph::seeding::derive_index_seed;
use quadglyph::Result;

fn triptych(noisy: &GrayImage, recon: &GrayImage, gt: &GrayImage) -> Result<GrayImage> {
    let (w, h) = (noisy.width(), noisy.height());
    GrayImage::from_fn(3 * w + 2, h, |x, y| match x {
        x if x < w => noisy.get(x, y),
        x if x == w || x == 2 * w + 1 => 1.0,
        x if x < 2 * w + 1 => recon.get(x - w - 1, y),
        x => gt.get(x - 2 * w - 2, y),
    })
}

fn main() -> Result<()> {
    let out = std::path::Path::new("out/crn");
    std::fs::create_dir_all(out)?;

    // 40 training digits + 5 held out, all noise types applied.
    let clean: Vec<GrayImage> = (0..45).map(|i| render_digit(i % 10, 32, 100 + i as u64)).collect();
    let gts: Vec<_> = clean
        .iter()
        .map(|img| binarize(img, 0.35, false))
        .collect::<Result<_>>()?;
    let mut corpora = Vec::new();
    for spec in [NoiseSpec::awgn(1), NoiseSpec::contrast(2), NoiseSpec::motion(3)] {
        let noisy: Vec<GrayImage> = clean
            .iter()
            .enumerate()
            .map(|(i, img)| {
                let mut s = spec.clone();
                s.seed = derive_index_seed(spec.seed, i as u64);
                apply_noise(img, &s)
            })
            .collect::<Result<_>>()?;
        corpora.push((spec.kind, noisy));
    }

    let src = FilterBankSource::default_bank();
    let sources: Vec<PoolSource> = corpora
        .iter()
        .map(|(kind, noisy)| PoolSource {
            tag: kind.as_str().to_string(),
            is_clean: false,
            items: noisy
                .iter()
                .take(40)
                .enumerate()
                .map(|(i, img)| (format!("{}{i}", kind.as_str()), img, &gts[i]))
                .collect(),
        })
        .chain(std::iter::once(PoolSource {
            tag: "clean".into(),
            is_clean: true,
            items: clean
                .iter()
                .take(40)
                .enumerate()
                .map(|(i, img)| (format!("clean{i}"), img, &gts[i]))
                .collect(),
        }))
        .collect();

    let plan = CrnSamplingPlan {
        per_noisy_images: 30,
        clean_images: 14,
        pixels_per_image: 512,
        seed: 9,
    };
    let pool = build_pixel_pool(&sources, &src, &plan)?;
    println!(
        "pixel pool: {} samples ({} character / {} background)",
        pool.samples.len(),
        pool.character_count,
        pool.background_count
    );

    let cfg = TrainConfig {
        pretrain: PretrainConfig {
            epochs: 3,
            ..PretrainConfig::default()
        },
        finetune: FinetuneConfig {
            epochs: 30,
            dropout_p: 0.0,
            patience: 30,
            ..FinetuneConfig::default()
        },
        seed: 21,
    };
    let crn = train_crn(&pool, &[64, 64], &cfg)?;
    println!(
        "CRN trained ({} epochs), pool validation error {:.2}%",
        crn.epochs_run,
        100.0 * crn.validation_error
    );

    // Reconstruct the held-out digits under each noise type.
    for (kind, noisy) in &corpora {
        let mut f1_sum = 0.0;
        for i in 40..45 {
            let recon = reconstruct(&noisy[i], &src, "held-out", &crn.model)?;
            let m = pixel_metrics(&recon, &gts[i])?;
            f1_sum += m.f1;
            let strip = triptych(&noisy[i], &recon.to_gray(), &gts[i].to_gray())?;
            write_pgm(&out.join(format!("{}_{i}.pgm", kind.as_str())), &strip)?;
        }
        println!("{:<9} held-out mean foreground F1: {:.3}", kind.as_str(), f1_sum / 5.0);
    }
    println!("triptychs written to {}", out.display());
    Ok(())
}
