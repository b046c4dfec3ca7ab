use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use tamed_spde::experiments::{
    density_experiment, ergodicity_experiment, fit_rate, invariant_gap_experiment, weak_error_experiment,
    BinSpec, TestFunction,
};
use tamed_spde::integrator::{InitialCondition, SchemeConfig};
use tamed_spde::model::{DriftConstants, PolynomialDrift, TamedNonlinearity, TamingParams};
use tamed_spde::noise::NoiseSpec;
use tamed_spde::spectral::{eigenvalue, SpectralBasis};

fn allen_cahn(n: usize, sigma: f64, noise: NoiseSpec, tau: f64, horizon: f64) -> SchemeConfig {
    let basis = Arc::new(SpectralBasis::with_default_grid(n).unwrap());
    let tamed = TamedNonlinearity::new(
        PolynomialDrift::allen_cahn(sigma),
        DriftConstants::allen_cahn(sigma),
        TamingParams::default(),
        eigenvalue(n),
    )
    .unwrap();
    SchemeConfig::new(basis, tau, horizon, tamed, noise, InitialCondition::sin_pi(), 20240601).unwrap()
}

fn linear(n: usize, sigma: f64, noise: NoiseSpec, tau: f64, horizon: f64, c0: &[f64]) -> SchemeConfig {
    let basis = Arc::new(SpectralBasis::with_default_grid(n).unwrap());
    let tamed = TamedNonlinearity::new_unchecked(
        PolynomialDrift::linear(sigma),
        DriftConstants::allen_cahn(sigma),
        TamingParams::untamed(),
        eigenvalue(n),
    );
    SchemeConfig::new(basis, tau, horizon, tamed, noise, InitialCondition::Modal(c0.to_vec()), 5).unwrap()
}

/// `E ‖X_M‖²` of the linear scheme with `M` steps of size `tau`.
fn linear_second_moment(c0: &[f64], sigma: f64, q: &[f64], tau: f64, steps: i32) -> f64 {
    c0.iter()
        .zip(q)
        .enumerate()
        .map(|(j, (c, q))| {
            let e = (-((j + 1) as f64 * PI).powi(2) * tau).exp();
            let a2 = (e * (1.0 + sigma * tau)).powi(2);
            let noise: f64 = (0..steps).map(|k| a2.powi(k)).sum::<f64>() * e * e * tau * q;
            a2.powi(steps) * c * c + noise
        })
        .sum()
}

#[test]
fn fit_rate_examples() {
    let exact = fit_rate(&[0.1, 0.05, 0.025], &[0.4, 0.2, 0.1]).unwrap();
    assert!((exact.slope - 1.0).abs() < 1e-12);
    let half = fit_rate(&[0.1, 0.0707, 0.05], &[0.4, 0.2, 0.1]).unwrap();
    assert!((half.slope - 0.5).abs() < 1e-3);
    let constructed: Vec<f64> = [0.4f64, 0.2, 0.1].iter().map(|t| 0.1 * (t / 0.4).sqrt()).collect();
    assert!((fit_rate(&constructed, &[0.4, 0.2, 0.1]).unwrap().slope - 0.5).abs() < 1e-6);
    assert!(fit_rate(&[0.1], &[0.4]).is_err());
}

proptest! {
    #[test]
    fn fit_rate_slope_is_scale_invariant(
        errors in prop::collection::vec(1e-6f64..1.0, 4..8),
        scale in 1e-3f64..1e3,
    ) {
        let taus: Vec<f64> = (0..errors.len()).map(|k| 0.5f64.powi(k as i32)).collect();
        let a = fit_rate(&errors, &taus).unwrap();
        let scaled: Vec<f64> = errors.iter().map(|e| e * scale).collect();
        let b = fit_rate(&scaled, &taus).unwrap();
        prop_assert!((a.slope - b.slope).abs() < 1e-9);
        prop_assert!((b.intercept - a.intercept - scale.ln()).abs() < 1e-9);
    }
}

#[test]
fn reference_level_has_zero_error() {
    let base = allen_cahn(8, 1.0, NoiseSpec::white(), 1.0 / 64.0, 1.0);
    let report = weak_error_experiment(&base, &[8, 16, 64], 64, &[TestFunction::SinNorm], 500, 2).unwrap();
    let row = report.rows.iter().find(|r| r.steps == 64).unwrap();
    assert_eq!(row.error, 0.0);
    assert!(report.rows.iter().all(|r| r.error >= 0.0));
}

#[test]
fn linear_deterministic_weak_error_is_closed_form() {
    let (sigma, c0) = (2.0, [1.0, 0.5, -0.3, 0.2]);
    let levels = [32, 64, 128, 256, 512];
    let m_ref = 8192;
    let base = linear(4, sigma, NoiseSpec::off(), 1.0 / m_ref as f64, 1.0, &c0);
    let report = weak_error_experiment(&base, &levels, m_ref, &[TestFunction::NormSq], 500, 1).unwrap();
    let q = [0.0; 4];
    let reference = linear_second_moment(&c0, sigma, &q, 1.0 / m_ref as f64, m_ref as i32);
    let mut analytic = Vec::new();
    for &m in &levels {
        let expected = (reference - linear_second_moment(&c0, sigma, &q, 1.0 / m as f64, m as i32)).abs();
        let row = report.rows.iter().find(|r| r.steps == m).unwrap();
        assert!((row.error - expected).abs() <= 1e-12 * reference, "M={m}: {} vs {expected}", row.error);
        analytic.push(expected);
    }
    let taus: Vec<f64> = levels.iter().map(|&m| 1.0 / m as f64).collect();
    let analytic_slope = fit_rate(&analytic, &taus).unwrap().slope;
    let measured = report.rate(TestFunction::NormSq).unwrap().slope;
    assert!((measured - analytic_slope).abs() < 0.1);
    assert!((measured - 1.0).abs() < 0.1, "slope {measured}");
}

#[test]
fn common_random_numbers_estimator_is_unbiased() {
    let (sigma, c0) = (1.0, [0.8, -0.4, 0.3, 0.1]);
    let levels = [4, 8, 16, 32];
    let m_ref = 128;
    let tau_ref = 1.0 / m_ref as f64;
    let base = linear(4, sigma, NoiseSpec::white(), tau_ref, 1.0, &c0);
    let report = weak_error_experiment(&base, &levels, m_ref, &[TestFunction::NormSq], 4000, 2).unwrap();
    let q = [1.0; 4];
    let reference = linear_second_moment(&c0, sigma, &q, tau_ref, m_ref as i32);
    for &m in &levels {
        let expected = reference - linear_second_moment(&c0, sigma, &q, 1.0 / m as f64, m as i32);
        let row = report.rows.iter().find(|r| r.steps == m).unwrap();
        assert!(
            (row.error - expected.abs()).abs() < 3.0 * row.stderr,
            "M={m}: {} vs {} (se {})",
            row.error,
            expected,
            row.stderr
        );
    }
}

#[test]
fn identical_initial_values_give_zero_gap() {
    let cfg = allen_cahn(8, 1.0, NoiseSpec::white(), 0.01, 1.0);
    let initials = [InitialCondition::sin_pi(), InitialCondition::sin_pi()];
    let report = ergodicity_experiment(&cfg, &initials, &[0.0, 0.5, 1.0], TestFunction::SinNorm, 500, 2).unwrap();
    assert_eq!(report.gaps.len(), 1);
    assert_eq!(report.gaps[0].gap, 0.0);
    assert!(report.passed);
    assert!(ergodicity_experiment(&cfg, &initials[..1], &[1.0], TestFunction::SinNorm, 500, 1).is_err());
    assert!(ergodicity_experiment(&cfg, &initials, &[1.0], TestFunction::SinNorm, 100, 1).is_err());
}

#[test]
fn deterministic_decay_gives_point_mass() {
    let basis = Arc::new(SpectralBasis::with_default_grid(4).unwrap());
    let cfg = SchemeConfig::new(
        basis,
        0.1,
        20.0,
        TamedNonlinearity::zero_drift(eigenvalue(4)),
        NoiseSpec::off(),
        InitialCondition::sin_pi(),
        0,
    )
    .unwrap();
    let report = density_experiment(&cfg, 0..1000, BinSpec::Auto(10), 1).unwrap();
    let (lo, hi, mass) = report
        .histogram
        .bins()
        .find(|(lo, hi, _)| *lo <= report.values[0] && report.values[0] <= *hi)
        .unwrap();
    assert!(lo < hi);
    assert_eq!(mass, 1.0);
    assert!(report.values.iter().all(|v| v.abs() < 1e-30));
}

#[test]
fn invariant_density_is_sampling_stable() {
    let cfg = allen_cahn(32, 1.0, NoiseSpec::white(), 0.01, 2.0);
    let bins = BinSpec::Fixed {
        lo: -1.5,
        hi: 1.5,
        n: 30,
    };
    let a = density_experiment(&cfg, 0..5000, bins, 2).unwrap();
    let b = density_experiment(&cfg, 5000..10000, bins, 2).unwrap();
    assert!((a.histogram.total_mass() - 1.0).abs() < 1e-12);
    assert!((b.histogram.total_mass() - 1.0).abs() < 1e-12);
    assert_eq!(a.blow_ups + b.blow_ups, 0);
    let d = a.histogram.l1_distance(&b.histogram).unwrap();
    assert!(d < 0.1, "L1 distance {d}");
    assert!(density_experiment(&cfg, 0..999, bins, 1).is_err());
}

#[test]
fn invariant_gap_saturates_in_contractive_setup() {
    let cfg = allen_cahn(16, 1.0, NoiseSpec::white(), 0.02, 4.0);
    let report = invariant_gap_experiment(&cfg, 100, TestFunction::SinNorm, 2000, 2).unwrap();
    assert!(report.saturated, "{report:?}");
    assert!(report.monotone, "{report:?}");
    assert_eq!(report.levels.len(), 3);
    assert!(report.levels.iter().all(|l| l.blow_ups == 0));
    assert!(report.gaps.iter().all(|g| g.gap <= 2.0));
    assert!(report.proxy_gap <= 2.0);
    assert!((report.horizon_time - 4.0).abs() < 1e-12);
}
