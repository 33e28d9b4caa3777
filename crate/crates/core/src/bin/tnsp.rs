use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tnsp::error::{Error, Result};
use tnsp::experiment::{accepts, default_experiment, run, ExperimentConfig};
use tnsp::parallel::with_workers;

/// Haar-random tensor networks: channel spectra, gradient variances and
/// Riemannian optimization.
#[derive(Parser)]
#[command(name = "tnsp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Layer-transition channel spectra.
    Spectra(Common),
    /// Monte Carlo gradient variances (MPS, MERA/TTNS or a global unitary).
    Variance(Common),
    /// Riemannian gradient descent / L-BFGS on MPS or MERA.
    Optimize(Common),
    /// Haar first and second moment checks.
    Checks(Common),
    /// Norm statistics of unnormalized random MPS.
    NormStats(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; a built-in default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "TNSP_WORKERS")]
    workers: Option<usize>,
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Self::Spectra(c) => ("spectra", c),
            Self::Variance(c) => ("variance", c),
            Self::Optimize(c) => ("optimize", c),
            Self::Checks(c) => ("checks", c),
            Self::NormStats(c) => ("norm-stats", c),
        }
    }
}

const DEFAULT_SEED: u64 = 1;

fn load(subcommand: &str, args: &Common) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::from_json(&fs::read_to_string(path)?)?,
        None => {
            let experiment = default_experiment(subcommand).expect("every subcommand has a default");
            ExperimentConfig::new(experiment, DEFAULT_SEED)
        }
    };
    if !accepts(subcommand, &config.experiment) {
        return Err(Error::InvalidConfig(format!(
            "`{subcommand}` cannot run a {} config",
            config.experiment.kind()
        )));
    }
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    if let Some(samples) = args.samples {
        config.set_samples(samples)?;
    }
    if let Some(out) = &args.out {
        config.output = Some(out.clone());
    }
    Ok(config)
}

fn execute(subcommand: &str, args: &Common) -> Result<bool> {
    let config = load(subcommand, args)?;
    let outcome = with_workers(args.workers, || run(&config))??;
    let dir = config.output.clone().unwrap_or_else(|| PathBuf::from("out"));
    let (csv, json) = outcome.write(&dir, &config.stem())?;
    for gate in &outcome.gates {
        println!("{} {}: {}", if gate.passed { "PASS" } else { "FAIL" }, gate.name, gate.detail);
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (subcommand, args) = cli.command.parts();
    match execute(subcommand, args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
