//! Build a decomposition map over a small corpus, prune it with the saliency
//! band, and compare feature counts against the raw pixel dimension.
//!
//! ```sh
//! cargo run --example quadtree_features
//! ```

use quadglyph::harness::synthcorpus::generate_corpus;
use quadglyph::quadtree::{
    build_decomposition_map, build_saliency_mask, decompose, featurize, RecurrenceMode,
};
use quadglyph::raster::{binarize, io::write_pgm, otsu_threshold, resample_nearest};
use quadglyph::Result;

fn main() -> Result<()> {
    let out = std::path::Path::new("out/quadtree");
    std::fs::create_dir_all(out)?;

    // Binarized 32x32 digits stand in for reconstructed characters.
    let (images, _) = generate_corpus(300, 32, 11)?;
    let binary: Vec<_> = images
        .iter()
        .map(|img| {
            let t = otsu_threshold(img)?;
            Ok(resample_nearest(&binarize(img, t, false)?, 32, 32)?.to_gray())
        })
        .collect::<Result<Vec<_>>>()?;

    let split = decompose(&binary[0], 0.1, 2)?;
    println!("first image: {} blocks split", split.len());

    let map = build_decomposition_map(&binary, 0.1, 2, RecurrenceMode::SplitCount)?;
    println!(
        "decomposition map over {} images: {} distinct blocks ever split",
        map.total_images,
        map.counts.len()
    );

    for (mu, nu) in [(0.05, 0.95), (0.0, 1.0)] {
        let mask = build_saliency_mask(&map, mu, nu)?;
        println!(
            "band [{mu}, {nu}]: {} features retained (raw dimension {})",
            mask.feature_len(),
            32 * 32
        );
        if mu > 0.0 {
            write_pgm(&out.join("saliency_mask.pgm"), &mask.to_visualization())?;
            let vector = featurize(&binary[0], &mask)?;
            println!(
                "first image's feature vector: len {}, first five {:?}",
                vector.len(),
                &vector[..5.min(vector.len())]
            );
        }
    }
    println!("mask rendering written to {}", out.display());
    Ok(())
}
