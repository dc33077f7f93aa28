//! Synthesize the three noise families over one clean digit and verify the
//! additive-noise calibration empirically.
//!
//! ```sh
//! cargo run --example noise_synthesis
//! ```

use quadglyph::harness::synthcorpus::render_digit;
use quadglyph::noise::{apply_noise, empirical_snr_db, motion_kernel, NoiseSpec};
use quadglyph::raster::{io::write_pgm, GrayImage};
use quadglyph::Result;

fn main() -> Result<()> {
    let out = std::path::Path::new("out/noise");
    std::fs::create_dir_all(out)?;

    let clean = render_digit(3, 32, 42);
    write_pgm(&out.join("clean.pgm"), &clean)?;

    for spec in [
        NoiseSpec::awgn(7),
        NoiseSpec::contrast(7),
        NoiseSpec::motion(7),
    ] {
        let noisy = apply_noise(&clean, &spec)?;
        let name = format!("{}.pgm", spec.kind.as_str());
        write_pgm(&out.join(&name), &noisy)?;
        println!(
            "{:<9} mean {:.3} -> {:.3}  ({})",
            spec.kind.as_str(),
            clean.mean(),
            noisy.mean(),
            name
        );
    }

    // The 5-pixel 15-degree motion kernel sums to one.
    let kernel = motion_kernel(5, 15.0)?;
    println!("\nmotion kernel ({0}x{0}):", kernel.size());
    for y in 0..kernel.size() {
        let row: Vec<String> = (0..kernel.size())
            .map(|x| format!("{:.3}", kernel.get(x, y)))
            .collect();
        println!("  {}", row.join(" "));
    }

    // Measured SNR of the Gaussian generator over a mid-gray field.
    let field = GrayImage::constant(64, 64, 0.5)?;
    for snr_db in [9.5, 12.0] {
        let measured = empirical_snr_db(&field, 1, snr_db)?;
        println!("requested {snr_db:>4.1} dB -> measured {measured:.2} dB (pre-clamp)");
    }
    println!("images written to {}", out.display());
    Ok(())
}
