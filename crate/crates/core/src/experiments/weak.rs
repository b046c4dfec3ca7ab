//! Weak-error estimation with common random numbers.
//!
//! Every sample draws one Brownian path on the reference grid of `M_ref`
//! steps. The reference scheme consumes the fine increments directly; a
//! coarse level with `M` steps consumes sums of `M_ref / M` of them. The
//! estimator is `|mean_s (φ(X_ref,s) − φ(X_M,s))|`.

use std::sync::Arc;

use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use super::{fit_rate, mean_stderr, TestFunction};
use crate::ensemble::{par_batches, run_ensemble, BatchNoise, BatchStepper};
use crate::error::{invalid, Result};
use crate::integrator::{Checkpoints, SchemeConfig};
use crate::model::TamedNonlinearity;
use crate::noise::{increment_scales, NoiseStream};
use crate::spectral::SpectralBasis;

/// Minimum sample count for weak-error and ergodicity estimates.
pub const MIN_SAMPLES: u64 = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakErrorRow {
    pub phi: TestFunction,
    /// Stepsize for temporal sweeps, `1/λ_N` for spatial sweeps.
    pub tau: f64,
    pub steps: usize,
    pub error: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub blow_ups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub phi: TestFunction,
    pub slope: f64,
    pub intercept: f64,
    pub band: Option<(f64, f64)>,
    pub levels_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakErrorReport {
    pub rows: Vec<WeakErrorRow>,
    pub rates: Vec<RateRow>,
    pub samples: u64,
    pub seed: u64,
    pub reference_steps: usize,
    pub reference_blow_ups: usize,
}

impl WeakErrorReport {
    pub fn rate(&self, phi: TestFunction) -> Option<&RateRow> {
        self.rates.iter().find(|r| r.phi == phi)
    }
}

struct Level<'a> {
    ratio: u64,
    stepper: BatchStepper<'a>,
    states: Array2<f64>,
    increments: Array2<f64>,
    alive: Vec<bool>,
}

/// Temporal weak errors of `base` (horizon `base.horizon()`) at each coarse
/// step count in `levels` against a reference with `reference_steps` steps.
pub fn weak_error_experiment(
    base: &SchemeConfig,
    levels: &[usize],
    reference_steps: usize,
    phis: &[TestFunction],
    samples: u64,
    workers: usize,
) -> Result<WeakErrorReport> {
    if samples < MIN_SAMPLES {
        return Err(invalid(format!(
            "weak-error estimates need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    if levels.is_empty() || phis.is_empty() {
        return Err(invalid("need at least one level and one test function"));
    }
    if reference_steps == 0 || levels.iter().any(|&m| m == 0 || reference_steps % m != 0) {
        return Err(invalid(format!(
            "every coarse step count must divide the reference count {reference_steps}"
        )));
    }
    let horizon = base.horizon();
    if !(horizon > 0.0) {
        return Err(invalid("weak-error horizon must be positive"));
    }
    let dim = base.dim();
    let tau_ref = horizon / reference_steps as f64;
    let scales = if base.noise.is_off() {
        vec![0.0; dim]
    } else {
        increment_scales(&base.noise, dim, tau_ref)?
    };
    let initial = base.initial_state();
    let basis: &SpectralBasis = &base.basis;

    // per batch: per sample, φ values for [reference, levels...] or None on blow-up
    let per_batch = par_batches(0..samples, workers, |range| {
        let rows = (range.end - range.start) as usize;
        let streams: Vec<NoiseStream> = range
            .clone()
            .map(|s| NoiseStream::new(base.seed, s, reference_steps as u64))
            .collect();
        let mut noise = BatchNoise::new(&streams, scales.clone(), base.noise.is_off());
        let make_level = |steps: usize| -> Result<Level> {
            let mut states = Array2::zeros((rows, dim));
            for mut row in states.rows_mut() {
                row.assign(&ArrayView1::from(initial.coefficients()));
            }
            Ok(Level {
                ratio: (reference_steps / steps) as u64,
                stepper: BatchStepper::new(basis, &base.tamed, horizon / steps as f64, rows)?,
                states,
                increments: Array2::zeros((rows, dim)),
                alive: vec![true; rows],
            })
        };
        let mut reference = make_level(reference_steps)?;
        let mut coarse = levels.iter().map(|&m| make_level(m)).collect::<Result<Vec<_>>>()?;
        let all_alive = vec![true; rows];

        for s in 0..reference_steps as u64 {
            noise.fill(&mut reference.increments, s, 1, &all_alive);
            for level in coarse.iter_mut() {
                if s % level.ratio == 0 {
                    level.increments.assign(&reference.increments);
                } else {
                    level.increments += &reference.increments;
                }
                if (s + 1) % level.ratio == 0 {
                    level.stepper.synthesize(&level.states);
                    level
                        .stepper
                        .step_from_grid(&mut level.states, &level.increments, &mut level.alive);
                }
            }
            reference.stepper.synthesize(&reference.states);
            reference
                .stepper
                .step_from_grid(&mut reference.states, &reference.increments, &mut reference.alive);
        }

        let eval = |level: &Level, r: usize| -> Option<Vec<f64>> {
            level.alive[r].then(|| {
                let x = level.states.row(r);
                let x = x.as_slice().expect("standard layout");
                phis.iter().map(|phi| phi.eval_coefficients(x)).collect()
            })
        };
        let out: Vec<(Option<Vec<f64>>, Vec<Option<Vec<f64>>>)> = (0..rows)
            .map(|r| (eval(&reference, r), coarse.iter().map(|l| eval(l, r)).collect()))
            .collect();
        Ok(out)
    })?;
    let per_sample: Vec<_> = per_batch.into_iter().flatten().collect();

    let reference_blow_ups = per_sample.iter().filter(|(r, _)| r.is_none()).count();
    let mut rows = Vec::new();
    let mut rates = Vec::new();
    for (k, phi) in phis.iter().enumerate() {
        let mut errors = Vec::new();
        let mut taus = Vec::new();
        for (l, &m) in levels.iter().enumerate() {
            let blow_ups = per_sample.iter().filter(|(_, c)| c[l].is_none()).count();
            let diffs: Vec<f64> = per_sample
                .iter()
                .filter_map(|(r, c)| Some(r.as_ref()?[k] - c[l].as_ref()?[k]))
                .collect();
            let n = diffs.len();
            let (mean, se) = mean_stderr(diffs);
            let tau = horizon / m as f64;
            rows.push(WeakErrorRow {
                phi: *phi,
                tau,
                steps: m,
                error: mean.abs(),
                stderr: se,
                n_samples: n,
                blow_ups,
            });
            if blow_ups == 0 && reference_blow_ups == 0 {
                errors.push(mean.abs());
                taus.push(tau);
            }
        }
        if let Ok(fit) = fit_rate(&errors, &taus) {
            rates.push(RateRow {
                phi: *phi,
                slope: fit.slope,
                intercept: fit.intercept,
                band: fit.band,
                levels_used: fit.points_used,
            });
        }
    }
    Ok(WeakErrorReport {
        rows,
        rates,
        samples,
        seed: base.seed,
        reference_steps,
        reference_blow_ups,
    })
}

/// Spatial weak errors: the scheme of `base` on `dims` retained modes
/// against `reference_dim` modes, at the common stepsize `base.tau`.
///
/// Mode `j` draws the same Gaussians at every truncation, so all levels
/// share one noise path per sample. Rows report `1/λ_N` in the `tau`
/// column; the fitted slope estimates the spatial exponent.
pub fn spatial_error_experiment(
    base: &SchemeConfig,
    dims: &[usize],
    reference_dim: usize,
    phis: &[TestFunction],
    samples: u64,
    workers: usize,
) -> Result<WeakErrorReport> {
    if samples < MIN_SAMPLES {
        return Err(invalid(format!(
            "weak-error estimates need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    if dims.iter().any(|&n| n == 0 || n > reference_dim) {
        return Err(invalid("every truncation must lie in 1..=reference_dim"));
    }
    let ratio = base.basis.grid_size() as f64 / base.dim() as f64;
    let with_dim = |n: usize| -> Result<SchemeConfig> {
        let basis = Arc::new(SpectralBasis::new(n, (ratio * n as f64).ceil() as usize)?);
        let tamed = TamedNonlinearity {
            lambda_n: basis.top_eigenvalue(),
            ..base.tamed.clone()
        };
        SchemeConfig::new(
            basis,
            base.tau,
            base.horizon(),
            tamed,
            base.noise.clone(),
            base.initial.clone(),
            base.seed,
        )
    };
    let checkpoints = Checkpoints {
        times: vec![base.horizon()],
        observables: phis.to_vec(),
        keep_states: false,
    };
    let terminal = |cfg: &SchemeConfig| -> Result<Vec<Option<Vec<f64>>>> {
        Ok(run_ensemble(cfg, 0..samples, &checkpoints, workers)?
            .into_iter()
            .map(|r| (!r.blew_up()).then(|| r.observables[0].clone()))
            .collect())
    };
    let reference = terminal(&with_dim(reference_dim)?)?;
    let reference_blow_ups = reference.iter().filter(|r| r.is_none()).count();
    let levels = dims
        .iter()
        .map(|&n| Ok((n, terminal(&with_dim(n)?)?)))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut rates = Vec::new();
    for (k, phi) in phis.iter().enumerate() {
        let (mut errors, mut xs) = (Vec::new(), Vec::new());
        for (n, values) in &levels {
            let blow_ups = values.iter().filter(|v| v.is_none()).count();
            let diffs: Vec<f64> = reference
                .iter()
                .zip(values)
                .filter_map(|(r, c)| Some(r.as_ref()?[k] - c.as_ref()?[k]))
                .collect();
            let count = diffs.len();
            let (mean, se) = mean_stderr(diffs);
            let x = 1.0 / crate::spectral::eigenvalue(*n);
            rows.push(WeakErrorRow {
                phi: *phi,
                tau: x,
                steps: *n,
                error: mean.abs(),
                stderr: se,
                n_samples: count,
                blow_ups,
            });
            if blow_ups == 0 && reference_blow_ups == 0 {
                errors.push(mean.abs());
                xs.push(x);
            }
        }
        if let Ok(fit) = fit_rate(&errors, &xs) {
            rates.push(RateRow {
                phi: *phi,
                slope: fit.slope,
                intercept: fit.intercept,
                band: fit.band,
                levels_used: fit.points_used,
            });
        }
    }
    Ok(WeakErrorReport {
        rows,
        rates,
        samples,
        seed: base.seed,
        reference_steps: reference_dim,
        reference_blow_ups,
    })
}
