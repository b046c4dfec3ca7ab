//! Histogram of the first modal coefficient at the horizon.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ensemble::run_ensemble;
use crate::error::{invalid, Result};
use crate::integrator::{Checkpoints, SchemeConfig};

pub const MIN_DENSITY_SAMPLES: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinSpec {
    /// `n` equal bins spanning the observed range.
    Auto(usize),
    /// `n` equal bins on `[lo, hi]`; outliers land in the edge bins.
    Fixed { lo: f64, hi: f64, n: usize },
}

impl Default for BinSpec {
    fn default() -> Self {
        BinSpec::Auto(40)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    /// Probability mass per bin; sums to one.
    pub masses: Vec<f64>,
}

impl Histogram {
    pub fn build(values: &[f64], bins: BinSpec) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("histogram of an empty sample"));
        }
        let (mut lo, mut hi, n) = match bins {
            BinSpec::Auto(n) => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi, n)
            }
            BinSpec::Fixed { lo, hi, n } => (lo, hi, n),
        };
        if n == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(invalid(format!("bad bin range [{lo}, {hi}] with {n} bins")));
        }
        if hi == lo {
            let pad = 0.5 * lo.abs().max(1.0) * 1e-3;
            lo -= pad;
            hi += pad;
        }
        let width = (hi - lo) / n as f64;
        let edges: Vec<f64> = (0..=n).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0usize; n];
        for &v in values {
            let k = ((v - lo) / width).floor();
            let k = if k.is_nan() { 0 } else { k.clamp(0.0, (n - 1) as f64) as usize };
            counts[k] += 1;
        }
        let total = values.len() as f64;
        Ok(Self {
            edges,
            masses: counts.iter().map(|&c| c as f64 / total).collect(),
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.edges
            .windows(2)
            .zip(&self.masses)
            .map(|(e, &m)| (e[0], e[1], m))
    }

    /// `Σ |p_k − q_k|` over bins; both histograms must share edges.
    pub fn l1_distance(&self, other: &Histogram) -> Result<f64> {
        if self.edges != other.edges {
            return Err(invalid("histograms have different bin edges"));
        }
        Ok(self
            .masses
            .iter()
            .zip(&other.masses)
            .map(|(p, q)| (p - q).abs())
            .sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityReport {
    pub histogram: Histogram,
    pub values: Vec<f64>,
    pub samples: u64,
    pub blow_ups: usize,
    pub blow_up_fraction: f64,
}

/// Law of `⟨X_T, e_1⟩` over `samples`, with `T = cfg.horizon()`.
pub fn density_experiment(
    cfg: &SchemeConfig,
    samples: Range<u64>,
    bins: BinSpec,
    workers: usize,
) -> Result<DensityReport> {
    let count = samples.end.saturating_sub(samples.start);
    if count < MIN_DENSITY_SAMPLES {
        return Err(invalid(format!(
            "density estimates need at least {MIN_DENSITY_SAMPLES} samples, got {count}"
        )));
    }
    let checkpoints = Checkpoints {
        times: vec![cfg.horizon()],
        keep_states: true,
        ..Checkpoints::default()
    };
    let records = run_ensemble(cfg, samples, &checkpoints, workers)?;
    let values: Vec<f64> = records
        .iter()
        .filter(|r| !r.blew_up())
        .filter_map(|r| r.states.as_ref()?.last().map(|x| x.coefficients()[0]))
        .collect();
    let blow_ups = records.len() - values.len();
    let histogram = Histogram::build(&values, bins)?;
    Ok(DensityReport {
        histogram,
        values,
        samples: count,
        blow_ups,
        blow_up_fraction: blow_ups as f64 / count as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_normalized_and_clamped() {
        let h = Histogram::build(&[-5.0, 0.1, 0.2, 0.9, 7.0], BinSpec::Fixed { lo: 0.0, hi: 1.0, n: 4 }).unwrap();
        assert_eq!(h.masses, vec![0.6, 0.0, 0.0, 0.4]);
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_widens_range() {
        let h = Histogram::build(&[0.0; 10], BinSpec::Auto(5)).unwrap();
        assert!(h.edges[0] < 0.0 && h.edges[5] > 0.0);
        assert_eq!(h.masses.iter().filter(|&&m| m == 1.0).count(), 1);
    }

    #[test]
    fn l1_requires_shared_edges() {
        let a = Histogram::build(&[0.1, 0.6], BinSpec::Fixed { lo: 0.0, hi: 1.0, n: 2 }).unwrap();
        let b = Histogram::build(&[0.1, 0.2], BinSpec::Fixed { lo: 0.0, hi: 1.0, n: 2 }).unwrap();
        assert!((a.l1_distance(&b).unwrap() - 1.0).abs() < 1e-15);
        let c = Histogram::build(&[0.1], BinSpec::Fixed { lo: 0.0, hi: 2.0, n: 2 }).unwrap();
        assert!(a.l1_distance(&c).is_err());
    }
}
