//! Distance of long-time averages to the invariant law.
//!
//! The horizon `t_{2M}` is compared with `t_M` to check that the time
//! marginal has saturated; the first half of the run is burn-in. The runs at
//! `τ/2` and `τ/4` act as proxies for the invariant law at `τ`.

use serde::Serialize;

use super::{mean_stderr, TestFunction};
use crate::ensemble::run_ensemble_on_grid;
use crate::error::{invalid, Result};
use crate::integrator::{Checkpoints, SchemeConfig};

/// Refinement factors relative to the base stepsize.
const REFINEMENTS: [usize; 3] = [1, 2, 4];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementLevel {
    pub tau: f64,
    pub steps: usize,
    pub mean: f64,
    pub stderr: f64,
    pub blow_ups: usize,
}

/// `|E φ(X^τ_T) − E φ(X^{τ'}_T)|` for consecutive refinements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementGap {
    pub coarse_tau: f64,
    pub fine_tau: f64,
    pub gap: f64,
    /// Standard error of the paired difference.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantGapReport {
    pub phi: TestFunction,
    pub burn_in_time: f64,
    pub horizon_time: f64,
    /// `E φ(X_{t_{2M}}) − E φ(X_{t_M})` at the base stepsize.
    pub horizon_difference: f64,
    pub horizon_stderr: f64,
    /// Whether `|horizon_difference| ≤ 3 · horizon_stderr`.
    pub saturated: bool,
    pub levels: Vec<RefinementLevel>,
    pub gaps: Vec<RefinementGap>,
    /// Whether the `(τ, τ/2)` gap exceeds the `(τ/2, τ/4)` gap up to the sum
    /// of their standard errors.
    pub monotone: bool,
    /// Gap between the base run and the finest run.
    pub proxy_gap: f64,
    pub samples: u64,
}

/// Runs `cfg.tau` over `2 · burn_in_steps` steps together with two refined
/// stepsizes, all driven by one Brownian path per sample.
pub fn invariant_gap_experiment(
    cfg: &SchemeConfig,
    burn_in_steps: usize,
    phi: TestFunction,
    samples: u64,
    workers: usize,
) -> Result<InvariantGapReport> {
    if burn_in_steps == 0 {
        return Err(invalid("burn-in must be at least one step"));
    }
    if samples < 2 {
        return Err(invalid("invariant gap needs at least two samples"));
    }
    let m = burn_in_steps;
    let horizon_steps = 2 * m;
    let finest = REFINEMENTS[REFINEMENTS.len() - 1];
    let fine_steps = (horizon_steps * finest) as u64;
    let burn_in_time = m as f64 * cfg.tau;
    let horizon_time = horizon_steps as f64 * cfg.tau;

    // per level: per sample, (φ at t_M, φ at t_{2M}) or None after a blow-up
    let mut runs = Vec::with_capacity(REFINEMENTS.len());
    for &r in &REFINEMENTS {
        let level = cfg.with_steps(cfg.tau / r as f64, horizon_steps * r);
        let checkpoints = Checkpoints {
            times: vec![
                (m * r) as f64 * level.tau,
                (horizon_steps * r) as f64 * level.tau,
            ],
            observables: vec![phi],
            keep_states: false,
        };
        let records = run_ensemble_on_grid(&level, 0..samples, &checkpoints, workers, fine_steps)?;
        let values: Vec<Option<(f64, f64)>> = records
            .iter()
            .map(|rec| (!rec.blew_up()).then(|| (rec.observables[0][0], rec.observables[1][0])))
            .collect();
        runs.push((level.tau, horizon_steps * r, values));
    }

    let (horizon_difference, horizon_stderr) =
        mean_stderr(runs[0].2.iter().flatten().map(|(a, b)| b - a));
    let saturated = horizon_difference.abs() <= 3.0 * horizon_stderr;

    let levels: Vec<RefinementLevel> = runs
        .iter()
        .map(|(tau, steps, values)| {
            let (mean, stderr) = mean_stderr(values.iter().flatten().map(|v| v.1));
            RefinementLevel {
                tau: *tau,
                steps: *steps,
                mean,
                stderr,
                blow_ups: values.iter().filter(|v| v.is_none()).count(),
            }
        })
        .collect();
    let paired = |a: usize, b: usize| -> (f64, f64) {
        let (d, se) = mean_stderr(
            runs[a]
                .2
                .iter()
                .zip(&runs[b].2)
                .filter_map(|(x, y)| Some(x.as_ref()?.1 - y.as_ref()?.1)),
        );
        (d.abs(), se)
    };
    let gaps: Vec<RefinementGap> = (0..runs.len() - 1)
        .map(|k| {
            let (gap, stderr) = paired(k, k + 1);
            RefinementGap {
                coarse_tau: runs[k].0,
                fine_tau: runs[k + 1].0,
                gap,
                stderr,
            }
        })
        .collect();
    let monotone = gaps
        .windows(2)
        .all(|w| w[0].gap + w[0].stderr + w[1].stderr >= w[1].gap);
    let proxy_gap = paired(0, runs.len() - 1).0;

    Ok(InvariantGapReport {
        phi,
        burn_in_time,
        horizon_time,
        horizon_difference,
        horizon_stderr,
        saturated,
        levels,
        gaps,
        monotone,
        proxy_gap,
        samples,
    })
}
