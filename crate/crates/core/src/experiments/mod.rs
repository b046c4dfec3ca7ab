//! Monte Carlo experiments: weak rates, ergodicity, invariant densities.

mod density;
mod ergodicity;
mod invariant;
mod rate;
mod weak;

pub use density::{density_experiment, BinSpec, DensityReport, Histogram, MIN_DENSITY_SAMPLES};
pub use ergodicity::{ergodicity_experiment, ErgodicityReport, InitialSeries, PairGap, MOMENT_ORDER};
pub use invariant::{invariant_gap_experiment, InvariantGapReport, RefinementGap, RefinementLevel};
pub use rate::{fit_rate, RateFit};
pub use weak::{
    spatial_error_experiment, weak_error_experiment, RateRow, WeakErrorReport, WeakErrorRow, MIN_SAMPLES,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::ModalState;

/// Observable `φ` evaluated on a modal state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    /// `sin(‖x‖_H)`.
    SinNorm,
    /// `exp(−‖x‖²_H)`.
    ExpNegNormSq,
    /// `cos(⟨x, e_1⟩)`.
    CosFirstMode,
    /// `‖x‖²_H`; unbounded, for closed-form checks on linear models only.
    NormSq,
}

impl TestFunction {
    /// The three bounded smooth observables used for weak errors.
    pub const DEFAULT_SET: [TestFunction; 3] = [
        TestFunction::SinNorm,
        TestFunction::ExpNegNormSq,
        TestFunction::CosFirstMode,
    ];

    pub fn eval(&self, x: &ModalState) -> f64 {
        self.eval_coefficients(x.coefficients())
    }

    #[inline]
    pub fn eval_coefficients(&self, c: &[f64]) -> f64 {
        let norm_sq = || c.iter().map(|v| v * v).sum::<f64>();
        match self {
            TestFunction::SinNorm => norm_sq().sqrt().sin(),
            TestFunction::ExpNegNormSq => (-norm_sq()).exp(),
            TestFunction::CosFirstMode => c.first().copied().unwrap_or(0.0).cos(),
            TestFunction::NormSq => norm_sq(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::SinNorm => "sin_norm",
            TestFunction::ExpNegNormSq => "exp_neg_norm_sq",
            TestFunction::CosFirstMode => "cos_first_mode",
            TestFunction::NormSq => "norm_sq",
        }
    }

    /// Whether `|φ| ≤ 1`.
    pub fn is_bounded(&self) -> bool {
        !matches!(self, TestFunction::NormSq)
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sin_norm" => TestFunction::SinNorm,
            "exp_neg_norm_sq" => TestFunction::ExpNegNormSq,
            "cos_first_mode" => TestFunction::CosFirstMode,
            "norm_sq" => TestFunction::NormSq,
            _ => return Err(Error::Parse(format!("unknown test function `{s}`"))),
        })
    }
}

/// Regularity and rate exponents: weak error `≲ τ^κ + λ_N^{−ι}` with
/// `κ < γ ∧ θ ∧ 1` and `ι < γ ∧ ρ ∧ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub gamma: f64,
    pub theta: f64,
    pub rho: f64,
    pub kappa: f64,
    pub iota: f64,
}

impl RateParams {
    pub fn new(gamma: f64, theta: f64, rho: f64, kappa: f64, iota: f64) -> Result<Self> {
        let p = Self {
            gamma,
            theta,
            rho,
            kappa,
            iota,
        };
        if !(kappa > 0.0 && kappa < 1.0 && iota > 0.0 && iota < 1.0) {
            return Err(invalid("rate exponents must lie in (0, 1)"));
        }
        if !(kappa < p.temporal_bound()) || !(iota < p.spatial_bound()) {
            return Err(invalid(format!(
                "kappa={kappa} must be < {} and iota={iota} < {}",
                p.temporal_bound(),
                p.spatial_bound()
            )));
        }
        Ok(p)
    }

    /// `γ ∧ θ ∧ 1`.
    pub fn temporal_bound(&self) -> f64 {
        self.gamma.min(self.theta).min(1.0)
    }

    /// `γ ∧ ρ ∧ 1`.
    pub fn spatial_bound(&self) -> f64 {
        self.gamma.min(self.rho).min(1.0)
    }
}

/// Sample mean and its standard error, summed in iteration order.
pub fn mean_stderr<I: IntoIterator<Item = f64>>(values: I) -> (f64, f64) {
    let v: Vec<f64> = values.into_iter().collect();
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_function_values() {
        let x = ModalState::new(vec![3.0, 4.0]);
        assert!((TestFunction::SinNorm.eval(&x) - 5f64.sin()).abs() < 1e-15);
        assert!((TestFunction::ExpNegNormSq.eval(&x) - (-25f64).exp()).abs() < 1e-20);
        assert!((TestFunction::CosFirstMode.eval(&x) - 3f64.cos()).abs() < 1e-15);
        assert_eq!(TestFunction::NormSq.eval(&x), 25.0);
        for phi in TestFunction::DEFAULT_SET {
            assert!(phi.is_bounded());
            assert_eq!(phi.name().parse::<TestFunction>().unwrap(), phi);
        }
    }

    #[test]
    fn rate_params_bounds() {
        let white = RateParams::new(0.5, 1.0, 1.0, 0.49, 0.49).unwrap();
        assert_eq!(white.temporal_bound(), 0.5);
        assert!(RateParams::new(0.5, 1.0, 1.0, 0.6, 0.4).is_err());
        assert!(RateParams::new(1.0, 1.0, 1.0, 0.99, 0.99).is_ok());
        assert!(RateParams::new(1.0, 1.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn mean_and_stderr() {
        let (m, s) = mean_stderr([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr([2.0]), (2.0, 0.0));
        assert!(mean_stderr([]).0.is_nan());
    }
}
