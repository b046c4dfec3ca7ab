//! Equilibration from several initial values.
//!
//! Every initial value is driven by the same sample streams, so paths from
//! identical initial values coincide and gaps shrink faster than under
//! independent sampling.

use serde::Serialize;

use super::{mean_stderr, TestFunction};
use super::weak::MIN_SAMPLES;
use crate::ensemble::run_ensemble;
use crate::error::{invalid, Result};
use crate::integrator::{moment_monitor, Checkpoints, InitialCondition, MomentSeries, SchemeConfig};

/// Moment order tracked alongside the observable.
pub const MOMENT_ORDER: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitialSeries {
    pub initial: InitialCondition,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    pub blow_ups: usize,
    pub moments: MomentSeries,
}

/// Terminal gap between initial values `i` and `j`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairGap {
    pub i: usize,
    pub j: usize,
    pub gap: f64,
    /// `2 (SE_i + SE_j)`.
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErgodicityReport {
    pub phi: TestFunction,
    pub series: Vec<InitialSeries>,
    pub gaps: Vec<PairGap>,
    pub max_gap: f64,
    /// Rate `c` of a least-squares fit `max gap ≈ A e^{−ct}` over checkpoints
    /// with a positive gap; `None` with fewer than two such checkpoints.
    pub decay_rate: Option<f64>,
    pub samples: u64,
    pub passed: bool,
}

impl ErgodicityReport {
    pub fn total_blow_ups(&self) -> usize {
        self.series.iter().map(|s| s.blow_ups).sum()
    }
}

pub fn ergodicity_experiment(
    cfg: &SchemeConfig,
    initials: &[InitialCondition],
    times: &[f64],
    phi: TestFunction,
    samples: u64,
    workers: usize,
) -> Result<ErgodicityReport> {
    if initials.len() < 2 {
        return Err(invalid("ergodicity needs at least two initial values"));
    }
    if samples < MIN_SAMPLES {
        return Err(invalid(format!(
            "ergodicity estimates need at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    let checkpoints = Checkpoints {
        times: times.to_vec(),
        observables: vec![phi],
        keep_states: false,
    };
    let mut series = Vec::with_capacity(initials.len());
    for initial in initials {
        let run = cfg.with_initial(initial.clone());
        let records = run_ensemble(&run, 0..samples, &checkpoints, workers)?;
        let live: Vec<_> = records.iter().filter(|r| !r.blew_up()).collect();
        let (mut mean, mut stderr) = (Vec::new(), Vec::new());
        for c in 0..times.len() {
            let (m, s) = mean_stderr(live.iter().map(|r| r.observables[c][0]));
            mean.push(m);
            stderr.push(s);
        }
        series.push(InitialSeries {
            initial: initial.clone(),
            times: times.to_vec(),
            mean,
            stderr,
            blow_ups: records.len() - live.len(),
            moments: moment_monitor(&records, MOMENT_ORDER)?,
        });
    }

    let last = times.len().checked_sub(1).ok_or_else(|| invalid("no checkpoints"))?;
    let mut gaps = Vec::new();
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            let gap = (series[i].mean[last] - series[j].mean[last]).abs();
            let threshold = 2.0 * (series[i].stderr[last] + series[j].stderr[last]);
            gaps.push(PairGap {
                i,
                j,
                gap,
                threshold,
                passed: gap < threshold || gap == 0.0,
            });
        }
    }
    let max_gap = gaps.iter().map(|g| g.gap).fold(0.0, f64::max);

    let decay_pts: Vec<(f64, f64)> = (0..times.len())
        .filter_map(|c| {
            let means = series.iter().map(|s| s.mean[c]);
            let hi = means.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = means.fold(f64::INFINITY, f64::min);
            let g = hi - lo;
            (g > 0.0 && g.is_finite()).then(|| (times[c], g))
        })
        .collect();
    let decay_rate = exponential_rate(&decay_pts);

    let passed = gaps.iter().all(|g| g.passed) && series.iter().all(|s| s.blow_ups == 0);
    Ok(ErgodicityReport {
        phi,
        series,
        gaps,
        max_gap,
        decay_rate,
        samples,
        passed,
    })
}

/// `−slope` of the least-squares line through `(t, ln g)`.
fn exponential_rate(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mg = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stg: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1.ln() - mg)).sum();
    (stt > 0.0).then(|| -stg / stt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_rate_recovers_decay() {
        let pts: Vec<(f64, f64)> = (0..10).map(|k| (k as f64, 3.0 * (-0.7 * k as f64).exp())).collect();
        assert!((exponential_rate(&pts).unwrap() - 0.7).abs() < 1e-12);
        assert!(exponential_rate(&pts[..1]).is_none());
    }
}
