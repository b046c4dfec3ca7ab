use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tamed_spde::cli_io::{exit, run, Command, RunConfig, RunOptions};

#[derive(Parser, Debug)]
#[command(name = "tamed-spde", version, about = "Tamed exponential Euler experiments for stochastic Allen-Cahn type equations")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Built-in configuration: white-contractive or trace-noncontractive.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Master seed; overrides the configuration.
    #[arg(long, global = true, env = "TAMED_SPDE_SEED")]
    seed: Option<u64>,

    /// Monte Carlo sample count; overrides the configuration.
    #[arg(long, global = true)]
    samples: Option<u64>,

    /// Worker threads. Results do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Check the configuration and write validation.json.
    Validate,
    /// Record trajectories at checkpoints.
    Simulate,
    /// Temporal weak errors and fitted rates.
    WeakRate,
    /// Equilibration from several initial values.
    Ergodicity,
    /// Histogram of the first modal coefficient at the horizon.
    Density,
    /// Saturation and refinement gaps of long-time averages.
    InvariantGap,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Validate => Command::Validate,
            Cmd::Simulate => Command::Simulate,
            Cmd::WeakRate => Command::WeakRate,
            Cmd::Ergodicity => Command::Ergodicity,
            Cmd::Density => Command::Density,
            Cmd::InvariantGap => Command::InvariantGap,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::from_toml_str(&text).map_err(|e| e.to_string())?
        }
        (None, Some(name)) => RunConfig::preset(name).map_err(|e| e.to_string())?,
        (None, None) => RunConfig::preset("white-contractive").map_err(|e| e.to_string())?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(samples) = cli.samples {
        cfg.experiment.samples = samples;
        cfg.experiment.trajectories = samples;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(exit::CONFIG as u8);
        }
    };
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let opts = RunOptions {
        out: cli.out.clone(),
        workers,
    };
    match run(cli.command.into(), &cfg, &opts) {
        Ok(outcome) => {
            let m = &outcome.manifest;
            if let Some(msg) = &m.message {
                eprintln!("{}: {msg}", m.command);
            }
            for file in &m.outputs {
                println!("{}", opts.out.join(file).display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit::FAILURE as u8)
        }
    }
}
