//! Standardize a raw character image: non-local-means smoothing, Otsu
//! binarization, largest-component centering, and canonical resampling.
//!
//! Writes each intermediate to out/preprocess/ as PGM.
//!
//! ```sh
//! cargo run --example preprocess
//! ```

use quadglyph::harness::synthcorpus::render_digit;
use quadglyph::raster::{
    binarize, center_pad_square, connected_components, io::write_pgm, nl_means, otsu_threshold,
    resample_bilinear, resample_nearest,
};
use quadglyph::Result;

fn main() -> Result<()> {
    let out = std::path::Path::new("out/preprocess");
    std::fs::create_dir_all(out)?;

    // A digit with the polarity of scanned data is just its rendering; the
    // chain standardizes it to bright-on-black at 32x32.
    let raw = render_digit(4, 48, 1234);
    write_pgm(&out.join("0_raw.pgm"), &raw)?;

    let smooth = nl_means(&raw, 3, 10, 0.1)?;
    write_pgm(&out.join("1_nl_means.pgm"), &smooth)?;

    let t = otsu_threshold(&smooth)?;
    let bin = binarize(&smooth, t, false)?;
    println!("otsu threshold: {t:.4}");
    write_pgm(&out.join("2_binarized.pgm"), &bin.to_gray())?;

    let labeling = connected_components(&bin);
    println!(
        "{} foreground components; largest has {} pixels",
        labeling.component_count(),
        labeling
            .largest_id
            .map(|id| labeling.component_sizes[id as usize])
            .unwrap_or(0)
    );

    let centered = center_pad_square(&smooth, &bin, 10)?;
    write_pgm(&out.join("3_centered.pgm"), &centered)?;
    println!(
        "centered canvas: {}x{} (component boxed with >= 10 px borders)",
        centered.width(),
        centered.height()
    );

    let canonical = resample_bilinear(&centered, 32, 32)?;
    write_pgm(&out.join("4_canonical.pgm"), &canonical)?;

    // Ground truth for the reconstruction network: binarized, centered the
    // same way, resampled with nearest neighbor so it stays binary.
    let gt_gray = center_pad_square(&bin.to_gray(), &bin, 10)?;
    let gt = resample_nearest(&binarize(&gt_gray, 0.5, false)?, 32, 32)?;
    write_pgm(&out.join("5_ground_truth.pgm"), &gt.to_gray())?;
    println!(
        "ground truth foreground: {} of {} pixels",
        gt.foreground_count(),
        32 * 32
    );
    println!("intermediates written to {}", out.display());
    Ok(())
}
