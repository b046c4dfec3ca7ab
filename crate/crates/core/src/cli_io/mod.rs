//! Configuration, run orchestration, manifests and CSV output.

mod config;
mod manifest;
mod output;

pub use config::{
    default_initials, load_and_validate, DiscretizationSection, ExperimentSection, ModelSection,
    NoiseKindName, NoiseSection, RunConfig, ValidatedConfig, ValidationSummary, PRESETS,
};
pub use manifest::{RunManifest, RunStatus, MANIFEST_FILE, MANIFEST_SCHEMA};
pub use output::{
    trajectory_header, write_density, write_ergodicity, write_invariant, write_json, write_moments,
    write_rates, write_trajectories, write_weak_errors, DENSITY_HEADER, ERGODICITY_HEADER,
    INVARIANT_HEADER, MOMENTS_HEADER, RATES_HEADER, WEAK_ERROR_HEADER,
};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::ensemble::run_ensemble;
use crate::error::{Error, Result};
use crate::experiments::{
    density_experiment, ergodicity_experiment, invariant_gap_experiment, spatial_error_experiment,
    weak_error_experiment, BinSpec, TestFunction, MIN_DENSITY_SAMPLES, MIN_SAMPLES,
};
use crate::integrator::{Checkpoints, SchemeConfig};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const BLOW_UP: i32 = 3;
    pub const ACCEPTANCE: i32 = 4;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Simulate,
    WeakRate,
    Ergodicity,
    Density,
    InvariantGap,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Validate,
        Command::Simulate,
        Command::WeakRate,
        Command::Ergodicity,
        Command::Density,
        Command::InvariantGap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Simulate => "simulate",
            Command::WeakRate => "weak-rate",
            Command::Ergodicity => "ergodicity",
            Command::Density => "density",
            Command::InvariantGap => "invariant-gap",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown command `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out: PathBuf,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub manifest: RunManifest,
}

/// Exit category of a library error.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Validation(_) | Error::Parse(_) | Error::InvalidParameter(_) | Error::InsufficientData(_) => {
            exit::CONFIG
        }
        Error::BlowUp { .. } => exit::BLOW_UP,
        Error::DimensionMismatch { .. } | Error::Io(_) | Error::Json(_) => exit::FAILURE,
    }
}

struct Finished {
    code: i32,
    message: Option<String>,
}

impl Finished {
    fn ok() -> Self {
        Self { code: exit::OK, message: None }
    }

    fn fail(code: i32, message: String) -> Self {
        Self { code, message: Some(message) }
    }
}

/// Validates `config`, runs `command` and writes the manifest and artifacts
/// into `opts.out`. Errors are reserved for failures to write the manifest.
pub fn run(command: Command, config: &RunConfig, opts: &RunOptions) -> Result<Outcome> {
    std::fs::create_dir_all(&opts.out)?;
    let mut manifest = RunManifest::begin(command.name(), config, opts.workers);
    manifest.write(&opts.out)?;

    let finished = match config.validate() {
        Err(err) => {
            let violations = match &err {
                Error::Validation(v) => v.clone(),
                other => vec![crate::error::Violation::new("config", other.to_string())],
            };
            let summary = ValidationSummary::rejected(violations);
            if command == Command::Validate {
                write_json(&opts.out.join("validation.json"), &summary)?;
                manifest.outputs.push("validation.json".into());
            }
            manifest.validation = Some(summary);
            Finished::fail(exit::CONFIG, err.to_string())
        }
        Ok(valid) => {
            manifest.validation = Some(valid.summary.clone());
            match dispatch(command, &valid, opts, &mut manifest.outputs) {
                Ok(f) => f,
                Err(err) => Finished::fail(exit_code_for(&err), err.to_string()),
            }
        }
    };
    manifest.finish(finished.code, finished.message);
    manifest.write(&opts.out)?;
    Ok(Outcome {
        exit_code: finished.code,
        manifest,
    })
}

/// Checkpoint times every `every` on the grid of `cfg`, always including
/// `0` and the horizon.
pub fn checkpoint_times(cfg: &SchemeConfig, every: f64) -> Vec<f64> {
    let stride = ((every / cfg.tau).round() as usize).max(1);
    let mut marks: Vec<usize> = (0..=cfg.steps).step_by(stride).collect();
    if marks.last() != Some(&cfg.steps) {
        marks.push(cfg.steps);
    }
    marks.into_iter().map(|m| m as f64 * cfg.tau).collect()
}

#[derive(Serialize)]
struct DensitySummary<'a> {
    samples: u64,
    blow_ups: usize,
    blow_up_fraction: f64,
    total_mass: f64,
    edges: &'a [f64],
    masses: &'a [f64],
}

fn dispatch(
    command: Command,
    valid: &ValidatedConfig,
    opts: &RunOptions,
    outputs: &mut Vec<String>,
) -> Result<Finished> {
    let cfg = &valid.config;
    let e = &cfg.experiment;
    let scheme = &valid.scheme;
    let out = |name: &str, outputs: &mut Vec<String>| -> PathBuf {
        outputs.push(name.to_string());
        opts.out.join(name)
    };
    let blown = |n: usize, what: &str| {
        Finished::fail(exit::BLOW_UP, format!("{n} path(s) blew up in {what}"))
    };

    match command {
        Command::Validate => {
            write_json(&out("validation.json", outputs), &valid.summary)?;
            Ok(Finished::ok())
        }
        Command::Simulate => {
            let checkpoints = Checkpoints {
                times: checkpoint_times(scheme, e.checkpoint_every),
                observables: e.phis.clone(),
                keep_states: false,
            };
            let records = run_ensemble(scheme, 0..e.trajectories, &checkpoints, opts.workers)?;
            let f = std::fs::File::create(out("trajectories.csv", outputs))?;
            write_trajectories(std::io::BufWriter::new(f), &records, e.phis.len())?;
            let n = records.iter().filter(|r| r.blew_up()).count();
            Ok(if n > 0 { blown(n, "simulate") } else { Finished::ok() })
        }
        Command::WeakRate => {
            cfg.check_samples(MIN_SAMPLES)?;
            let tau_ref = e.weak_horizon / e.reference_steps as f64;
            let base = scheme.with_steps(tau_ref, e.reference_steps);
            let report =
                weak_error_experiment(&base, &e.levels, e.reference_steps, &e.phis, e.samples, opts.workers)?;
            write_weak_errors(&out("weak_error.csv", outputs), &report)?;
            write_rates(&out("rates.csv", outputs), &report)?;
            write_json(&out("weak_report.json", outputs), &report)?;
            if !e.spatial_dims.is_empty() {
                let spatial = spatial_error_experiment(
                    scheme,
                    &e.spatial_dims,
                    e.reference_dim,
                    &e.phis,
                    e.samples,
                    opts.workers,
                )?;
                write_weak_errors(&out("spatial_error.csv", outputs), &spatial)?;
                write_rates(&out("spatial_rates.csv", outputs), &spatial)?;
            }
            let primary = e.phis.first().copied().unwrap_or(TestFunction::SinNorm);
            Ok(match (report.rate(primary), e.slope_window) {
                (None, _) if report.reference_blow_ups > 0 || report.rows.iter().any(|r| r.blow_ups > 0) => {
                    blown(report.reference_blow_ups, "weak-rate")
                }
                (None, _) => Finished::fail(exit::ACCEPTANCE, format!("no rate could be fitted for {primary}")),
                (Some(rate), Some([lo, hi])) if !(lo..=hi).contains(&rate.slope) => Finished::fail(
                    exit::ACCEPTANCE,
                    format!("slope {:.4} for {primary} outside [{lo}, {hi}]", rate.slope),
                ),
                _ => Finished::ok(),
            })
        }
        Command::Ergodicity => {
            cfg.check_samples(MIN_SAMPLES)?;
            let phi = e.phis.first().copied().unwrap_or(TestFunction::SinNorm);
            let times = checkpoint_times(scheme, e.checkpoint_every);
            let report = ergodicity_experiment(scheme, &e.initials, &times, phi, e.samples, opts.workers)?;
            write_ergodicity(&out("ergodicity.csv", outputs), &report)?;
            write_moments(&out("moments.csv", outputs), &report)?;
            write_json(&out("ergodicity_report.json", outputs), &report)?;
            let n = report.total_blow_ups();
            Ok(if n > 0 {
                blown(n, "ergodicity")
            } else if !report.passed {
                Finished::fail(
                    exit::ACCEPTANCE,
                    format!("terminal gaps not within 2(SE_i + SE_j); max gap {:.4e}", report.max_gap),
                )
            } else {
                Finished::ok()
            })
        }
        Command::Density => {
            cfg.check_samples(MIN_DENSITY_SAMPLES)?;
            let report = density_experiment(scheme, 0..e.samples, BinSpec::Auto(e.bins), opts.workers)?;
            write_density(&out("density.csv", outputs), &report)?;
            write_json(
                &out("density_report.json", outputs),
                &DensitySummary {
                    samples: report.samples,
                    blow_ups: report.blow_ups,
                    blow_up_fraction: report.blow_up_fraction,
                    total_mass: report.histogram.total_mass(),
                    edges: &report.histogram.edges,
                    masses: &report.histogram.masses,
                },
            )?;
            Ok(if report.blow_ups > 0 { blown(report.blow_ups, "density") } else { Finished::ok() })
        }
        Command::InvariantGap => {
            let phi = e.phis.first().copied().unwrap_or(TestFunction::SinNorm);
            let burn_in = e.burn_in_steps.unwrap_or(scheme.steps / 2);
            let report = invariant_gap_experiment(scheme, burn_in, phi, e.samples, opts.workers)?;
            write_invariant(&out("invariant_gap.csv", outputs), &report)?;
            write_json(&out("invariant_report.json", outputs), &report)?;
            let n: usize = report.levels.iter().map(|l| l.blow_ups).sum();
            Ok(if n > 0 {
                blown(n, "invariant-gap")
            } else if !report.saturated {
                Finished::fail(
                    exit::ACCEPTANCE,
                    format!(
                        "horizon difference {:.3e} exceeds 3 SE = {:.3e}",
                        report.horizon_difference,
                        3.0 * report.horizon_stderr
                    ),
                )
            } else {
                Finished::ok()
            })
        }
    }
}
