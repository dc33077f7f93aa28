//! Thin command-line front end over the pipeline stages.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quadglyph::classify::{architecture_sweep, default_sweep_grid, CcnSpec};
use quadglyph::harness::corpus::FeatureSet;
use quadglyph::harness::{render, ExperimentConfig, MetricsReport, Pipeline, ReportFormat, Stage};
use quadglyph::noise::NoiseKind;
use quadglyph::seeding::derive_seed;
use quadglyph::{Error, Result};

#[derive(Parser)]
#[command(
    name = "quadglyph",
    about = "Noisy handwritten character pipeline: reconstruction, quadtree features, classification"
)]
struct Cli {
    /// Experiment config (TOML). Defaults to the built-in synthetic recipe.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Reuse cached stage artifacts whose inputs are unchanged.
    #[arg(long, global = true)]
    resume: bool,

    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Standardize the raw dataset and emit native/canonical/ground-truth corpora.
    Preprocess,
    /// Synthesize the configured noise corpora from the preprocessed images.
    SynthNoise,
    /// Train the per-pixel character reconstruction network.
    TrainCrn,
    /// Reconstruct every noisy corpus with the trained CRN.
    Reconstruct,
    /// Build decomposition maps and saliency masks on the training split.
    FitQuadtree,
    /// Emit quadtree (or raw-pixel) feature files for every split.
    Featurize,
    /// Train the character classification network per noise corpus.
    TrainCcn,
    /// Train, evaluate and write the metrics report.
    Evaluate,
    /// Full pipeline: preprocess through evaluate.
    Run,
    /// Sweep CCN architectures over one noise corpus's features.
    Sweep {
        /// Noise corpus to sweep on.
        #[arg(long, default_value = "awgn")]
        noise: String,
    },
    /// Render a previously written report.
    Report {
        #[arg(long, default_value = "table")]
        format: String,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_noise(name: &str) -> Result<NoiseKind> {
    match name {
        "awgn" => Ok(NoiseKind::Awgn),
        "contrast" => Ok(NoiseKind::Contrast),
        "motion" => Ok(NoiseKind::Motion),
        other => Err(Error::Config(format!(
            "unknown noise '{other}' (awgn|contrast|motion)"
        ))),
    }
}

fn run_to(cli: &Cli, stage: Stage) -> Result<()> {
    let cfg = load_config(cli)?;
    let out_dir = cfg.out_dir.clone();
    let mut pipeline = Pipeline::new(cfg, None, cli.resume);
    match pipeline.run(stage)? {
        Some(report) => {
            println!("{}", report.to_table());
            println!("report written to {}", out_dir.join("report.json").display());
        }
        None => {
            println!("stages complete under {}", out_dir.join("stages").display());
        }
    }
    Ok(())
}

fn run_sweep(cli: &Cli, noise: &str) -> Result<()> {
    let kind = parse_noise(noise)?;
    let cfg = load_config(cli)?;
    let out_dir = cfg.out_dir.clone();
    let res = cfg.canonical_size;

    let mut pipeline = Pipeline::new(cfg.clone(), None, cli.resume);
    pipeline.run(Stage::Featurize)?;

    let feat_dir = out_dir
        .join("stages")
        .join(format!("features-{}-{res}", kind.as_str()));
    let train = FeatureSet::load(&feat_dir.join("train.qgf"))?.to_batch()?;
    let valid = FeatureSet::load(&feat_dir.join("valid.qgf"))?.to_batch()?;
    let test = FeatureSet::load(&feat_dir.join("test.qgf"))?.to_batch()?;

    let specs: Vec<CcnSpec> = default_sweep_grid()
        .into_iter()
        .map(|architecture| CcnSpec {
            architecture,
            classes: cfg.dataset.classes,
            train_cfg: {
                let mut t = cfg.ccn.train.clone();
                t.seed = derive_seed(cfg.seed, &format!("sweep-{}", kind.as_str()));
                t
            },
        })
        .collect();
    let rows = architecture_sweep(&specs, &train, &valid, &test)?;

    let mut csv = String::from("architecture,error_pct,epochs_run,best\n");
    println!("{:<20} {:>10} {:>8}", "architecture", "error %", "best");
    for row in &rows {
        let arch = row
            .architecture
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join("-");
        println!(
            "{arch:<20} {:>10.2} {:>8}",
            row.error_pct,
            if row.best { "*" } else { "" }
        );
        csv.push_str(&format!(
            "{arch},{},{},{}\n",
            row.error_pct, row.epochs_run, row.best
        ));
    }
    let path = out_dir.join(format!("sweep-{}.csv", kind.as_str()));
    std::fs::write(&path, csv)?;
    println!("sweep written to {}", path.display());
    Ok(())
}

fn run_report(cli: &Cli, format: &str) -> Result<()> {
    let format: ReportFormat = format.parse()?;
    let cfg = load_config(cli)?;
    let path = cfg.out_dir.join("report.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Data(format!("{}: {e} (run `quadglyph run` first)", path.display())))?;
    let report = MetricsReport::from_json(&text)?;
    print!("{}", render(&report, format));
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Preprocess => run_to(cli, Stage::Preprocess),
        Command::SynthNoise => run_to(cli, Stage::SynthNoise),
        Command::TrainCrn => run_to(cli, Stage::TrainCrn),
        Command::Reconstruct => run_to(cli, Stage::Reconstruct),
        Command::FitQuadtree => run_to(cli, Stage::FitQuadtree),
        Command::Featurize => run_to(cli, Stage::Featurize),
        Command::TrainCcn => run_to(cli, Stage::TrainCcn),
        Command::Evaluate | Command::Run => run_to(cli, Stage::Evaluate),
        Command::Sweep { noise } => run_sweep(cli, noise),
        Command::Report { format } => run_report(cli, format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
