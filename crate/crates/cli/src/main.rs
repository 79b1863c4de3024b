use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use kai_esprit::array::synthesize_snapshots;
use kai_esprit::harness::batch_io::{read_batch, write_batch};
use kai_esprit::harness::experiment::run_estimator;
use kai_esprit::harness::{run_experiment, write_outputs, ExperimentConfig};
use kai_esprit::DoaError;

#[derive(Parser)]
#[command(name = "kai-doa", version, about = "Subspace DOA estimation on uniform linear arrays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one snapshot batch and write it as JSON.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// SNR in dB.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        snr: f64,
        /// Output file; defaults to `<out>/<name>_batch.json`.
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// Estimate DOAs from one batch and print them.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        snr: f64,
        /// Read the batch from this file instead of synthesizing it.
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// Run the Monte Carlo sweep and write CSV and SVG outputs.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Run trials on one thread.
        #[arg(long)]
        serial: bool,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the reliability-factor grid step.
    #[arg(long)]
    increment: Option<f64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the number of trials per SNR point.
    #[arg(long)]
    trials: Option<usize>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<DoaError> for Failure {
    fn from(e: DoaError) -> Self {
        match e {
            DoaError::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    if let Some(inc) = common.increment {
        if !(inc > 0.0 && inc <= 1.0) {
            return Err(Failure::Config(format!("increment must lie in (0, 1], got {inc}")));
        }
        cfg.increment = inc;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(trials) = common.trials {
        if trials == 0 {
            return Err(Failure::Config("trials must be at least 1".into()));
        }
        cfg.trials = trials;
    }
    Ok(cfg)
}

fn synthesize(cfg: &ExperimentConfig, snr: f64, batch: Option<&Path>) -> Result<(), Failure> {
    let scenario = cfg.scenario_at(snr)?;
    let data = synthesize_snapshots(&scenario, &cfg.geometry, cfg.base_seed)?;
    let path = batch
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(format!("{}_batch.json", cfg.output_name)));
    write_batch(&data, &path)?;
    println!("{}", path.display());
    Ok(())
}

fn estimate(cfg: &ExperimentConfig, snr: f64, batch: Option<&Path>) -> Result<(), Failure> {
    let data = match batch {
        Some(path) => read_batch(path)?,
        None => synthesize_snapshots(&cfg.scenario_at(snr)?, &cfg.geometry, cfg.base_seed)?,
    };
    let num_sources = data.scenario.num_sources();
    let known = cfg.known_doas();
    println!("{:<14} {:>5} {:>12} {:>11} {:>8}", "estimator", "index", "angle_deg", "attribution", "mu_opt");
    for &est in &cfg.estimators {
        let known_for = if est == kai_esprit::harness::Estimator::TwoStepKai {
            known.as_slice()
        } else {
            &[]
        };
        let result = run_estimator(est, &data, &data.geometry, num_sources, known_for, cfg.increment)?;
        let mu = result.mu_opt.map_or_else(|| "-".to_string(), |m| format!("{m:.2}"));
        for (i, (angle, attr)) in result.angles_deg().iter().zip(&result.attribution).enumerate() {
            println!("{:<14} {:>5} {:>12.6} {:>11} {:>8}", est.name(), i, angle, attr.as_str(), mu);
        }
        if result.flags.any() {
            eprintln!("{}: flags {:?}", est.name(), result.flags);
        }
    }
    Ok(())
}

fn sweep(mut cfg: ExperimentConfig, serial: bool) -> Result<(), Failure> {
    if serial {
        cfg.parallel = false;
    }
    let table = run_experiment(&cfg)?;
    let files = write_outputs(&table, &cfg.output_dir, &cfg.output_name)?;
    for path in files.all() {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synthesize { common, snr, batch } => synthesize(&load(&common)?, snr, batch.as_deref()),
        Command::Estimate { common, snr, batch } => estimate(&load(&common)?, snr, batch.as_deref()),
        Command::Sweep { common, serial } => sweep(load(&common)?, serial),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
