// Temporary corpus-difficulty probe; removed before release.

use quadglyph::classify::{default_architecture, evaluate, train_ccn, CcnSpec};
use quadglyph::dbn::TrainConfig;
use quadglyph::harness::config::{DatasetConfig, DatasetFormat, PreprocessConfig, SplitSpec};
use quadglyph::harness::corpus::FeatureSet;
use quadglyph::harness::ingest::ingest;
use quadglyph::harness::pipeline::{
    noisify_split, preprocess_split, quadtree_features, raw_pixel_features, reconstruct_corpus,
};
use quadglyph::noise::{NoiseKind, NoiseSpec};
use quadglyph::quadtree::{build_decomposition_map, build_saliency_mask, RecurrenceMode};
use quadglyph::raster::BinaryImage;
use quadglyph::reconstruct::{
    build_pixel_pool, train_crn, CrnSamplingPlan, FilterBankSource, PixelTally, PoolSource,
};
use quadglyph::seeding::derive_seed;

const SEED: u64 = 7;

fn main() {
    let t0 = std::time::Instant::now();
    let kind_arg = std::env::args().nth(1).unwrap_or("awgn".into());
    let kind = match kind_arg.as_str() {
        "contrast" => NoiseKind::Contrast,
        _ => NoiseKind::Awgn,
    };
    let cfg = DatasetConfig {
        format: DatasetFormat::Synthetic,
        classes: 10,
        count: 13_000,
        image_size: 28,
        splits: SplitSpec::Counts { train: 10_000, valid: 1_000, test: 2_000 },
        ..DatasetConfig::default()
    };
    let ds = ingest(&cfg, SEED).unwrap();
    let pre: Vec<Vec<_>> = [&ds.train, &ds.valid, &ds.test]
        .into_iter()
        .map(|items| preprocess_split(items, &PreprocessConfig::default(), cfg.foreground, 32, 10).unwrap())
        .collect();
    println!("preprocessed in {:.0}s", t0.elapsed().as_secs_f64());

    let labels: Vec<Vec<u8>> = pre.iter().map(|s| s.iter().map(|(_, l)| *l).collect()).collect();
    let gts: Vec<Vec<BinaryImage>> = pre.iter().map(|s| s.iter().map(|(p, _)| p.gt.clone()).collect()).collect();
    let clean_train: Vec<_> = pre[0].iter().map(|(p, _)| p.canonical.clone()).collect();

    let spec_seed = derive_seed(SEED, &format!("noise-{}", kind.as_str()));
    let spec = match kind {
        NoiseKind::Contrast => NoiseSpec::contrast(spec_seed),
        _ => NoiseSpec::awgn(spec_seed),
    };
    let noisy: Vec<Vec<_>> = pre
        .iter()
        .zip(["train", "valid", "test"])
        .map(|(split, name)| {
            let natives: Vec<_> = split.iter().map(|(p, _)| p.native.clone()).collect();
            noisify_split(&natives, &spec, derive_seed(spec.seed, name), 32).unwrap()
        })
        .collect();

    // Raw-pixel baseline.
    let spec_ccn = |tag: &str| CcnSpec {
        architecture: default_architecture(kind),
        classes: 10,
        train_cfg: TrainConfig { seed: derive_seed(SEED, tag), ..TrainConfig::default() },
    };
    let raw = |s: usize| raw_pixel_features(&noisy[s], &labels[s]).unwrap();
    let t = std::time::Instant::now();
    let out = train_ccn(&raw(0).to_batch().unwrap(), &raw(1).to_batch().unwrap(), &spec_ccn("raw")).unwrap();
    let raw_err = evaluate(&out.model, &raw(2).to_batch().unwrap()).unwrap().error_pct;
    println!("raw-pixel baseline: {raw_err:.2}% ({:.0}s)", t.elapsed().as_secs_f64());

    // CRN (joint across all three kinds would be the real protocol; awgn-only here for speed? No:
    // use the same joint pool to keep numbers representative.)
    let mut all_noisy = vec![(kind, &noisy[0])];
    let other_specs: Vec<(NoiseKind, Vec<_>)> = [NoiseKind::Awgn, NoiseKind::Contrast, NoiseKind::Motion]
        .into_iter()
        .filter(|k| *k != kind)
        .map(|k| {
            let s_seed = derive_seed(SEED, &format!("noise-{}", k.as_str()));
            let s = match k {
                NoiseKind::Awgn => NoiseSpec::awgn(s_seed),
                NoiseKind::Contrast => NoiseSpec::contrast(s_seed),
                NoiseKind::Motion => NoiseSpec::motion(s_seed),
            };
            let natives: Vec<_> = pre[0].iter().map(|(p, _)| p.native.clone()).collect();
            (k, noisify_split(&natives, &s, derive_seed(s.seed, "train"), 32).unwrap())
        })
        .collect();
    for (k, v) in &other_specs {
        all_noisy.push((*k, v));
    }
    let gt_refs: Vec<&BinaryImage> = gts[0].iter().collect();
    let src = FilterBankSource::default_bank();
    let mut sources: Vec<PoolSource> = all_noisy
        .iter()
        .map(|(k, imgs)| PoolSource {
            tag: k.as_str().to_string(),
            is_clean: false,
            items: imgs.iter().enumerate().map(|(i, img)| (format!("{}/{i}", k.as_str()), img, gt_refs[i])).collect(),
        })
        .collect();
    sources.push(PoolSource {
        tag: "clean".into(),
        is_clean: true,
        items: clean_train.iter().enumerate().map(|(i, img)| (format!("c/{i}"), img, gt_refs[i])).collect(),
    });
    let plan = CrnSamplingPlan { seed: derive_seed(SEED, "crn-plan"), ..CrnSamplingPlan::default() };
    let pool = build_pixel_pool(&sources, &src, &plan).unwrap();
    let crn_cfg = TrainConfig { seed: derive_seed(SEED, "crn-train"), ..TrainConfig::default() };
    let t = std::time::Instant::now();
    let crn = train_crn(&pool, &[200, 200], &crn_cfg).unwrap();
    println!("CRN trained: val err {:.3}% ({:.0}s)", 100.0 * crn.validation_error, t.elapsed().as_secs_f64());

    let t = std::time::Instant::now();
    let recon: Vec<Vec<_>> = (0..3)
        .map(|s| reconstruct_corpus(&noisy[s], &src, &crn.model, "r").unwrap())
        .collect();
    let mut tally = PixelTally::default();
    for (r, g) in recon[2].iter().zip(&gts[2]) {
        tally.add(r, g).unwrap();
    }
    println!("reconstructed: test F1 {:.4} ({:.0}s)", tally.metrics().f1, t.elapsed().as_secs_f64());

    // Persist reconstructions for fast downstream iteration.
    for (s, name) in ["train", "valid", "test"].iter().enumerate() {
        let corpus = quadglyph::harness::corpus::Corpus {
            items: recon[s]
                .iter()
                .zip(&labels[s])
                .map(|(r, l)| (quadglyph::harness::corpus::Raster::Binary(r.clone()), *l))
                .collect(),
        };
        corpus.save(format!("/tmp/probe_recon_{name}_{}.qgc", kind.as_str()).as_ref()).unwrap();
        let noisy_corpus = quadglyph::harness::corpus::Corpus {
            items: noisy[s]
                .iter()
                .zip(&labels[s])
                .map(|(img, l)| (quadglyph::harness::corpus::Raster::Gray(img.clone()), *l))
                .collect(),
        };
        noisy_corpus.save(format!("/tmp/probe_noisy_{name}_{}.qgc", kind.as_str()).as_ref()).unwrap();
    }

    let recon_gray: Vec<Vec<_>> = recon.iter().map(|s| s.iter().map(|b| b.to_gray()).collect()).collect();
    let map = build_decomposition_map(&recon_gray[0], 0.1, 1, RecurrenceMode::SplitCount).unwrap();
    for (mu, nu, tag) in [(0.05, 0.95, "saliency"), (0.0, 1.0, "no-saliency")] {
        let mask = build_saliency_mask(&map, mu, nu).unwrap();
        let feats = |s: usize| -> FeatureSet { quadtree_features(&recon_gray[s], &labels[s], &mask).unwrap() };
        let t = std::time::Instant::now();
        let out = train_ccn(&feats(0).to_batch().unwrap(), &feats(1).to_batch().unwrap(), &spec_ccn(tag)).unwrap();
        let err = evaluate(&out.model, &feats(2).to_batch().unwrap()).unwrap().error_pct;
        println!("{tag}: {} features, error {err:.2}% ({:.0}s)", mask.feature_len(), t.elapsed().as_secs_f64());
    }
    println!("total {:.0}s", t0.elapsed().as_secs_f64());
}
