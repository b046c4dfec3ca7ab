use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use tamed_spde::ensemble::run_ensemble;
use tamed_spde::integrator::{
    discretized_convolution, moment_monitor, simulate_path, step, Checkpoints, InitialCondition, SchemeConfig,
};
use tamed_spde::model::{DriftConstants, PolynomialDrift, TamedNonlinearity, TamingParams};
use tamed_spde::noise::{sample_increment, NoiseSpec, NoiseStream};
use tamed_spde::spectral::{apply_semigroup, eigenvalue, ModalState, SpectralBasis};

fn reference_taming() -> TamingParams {
    TamingParams {
        alpha: 0.25,
        theta: 1.0,
        rho: 1.0,
        beta1: 1.0,
        beta2: 1.0,
        tau_max: 1.0,
    }
}

fn scheme(
    n: usize,
    drift: PolynomialDrift,
    taming: TamingParams,
    noise: NoiseSpec,
    tau: f64,
    horizon: f64,
    initial: InitialCondition,
) -> SchemeConfig {
    let basis = Arc::new(SpectralBasis::with_default_grid(n).unwrap());
    let tamed = TamedNonlinearity::new_unchecked(drift, DriftConstants::allen_cahn(1.0), taming, eigenvalue(n));
    SchemeConfig::new(basis, tau, horizon, tamed, noise, initial, 20240601).unwrap()
}

/// Grid evaluation, pointwise taming, projection and decay written out with
/// direct trigonometric sums.
fn straight_line_step(c: &[f64], dw: &[f64], sigma: f64, tau: f64, n: usize, k: usize) -> Vec<f64> {
    let h = 1.0 / (k + 1) as f64;
    let lambda_n = (n as f64 * PI).powi(2);
    let scale = tau + 1.0 / lambda_n;
    let g: Vec<f64> = (1..=k)
        .map(|i| {
            let x = i as f64 * h;
            let u: f64 = (1..=n).map(|j| c[j - 1] * SQRT_2 * (j as f64 * PI * x).sin()).sum();
            (sigma * u - u * u * u) / (1.0 + scale * u.abs().powf(8.0)).powf(0.25)
        })
        .collect();
    (1..=n)
        .map(|j| {
            let d: f64 = g
                .iter()
                .enumerate()
                .map(|(i, v)| v * SQRT_2 * (j as f64 * PI * (i + 1) as f64 * h).sin())
                .sum::<f64>()
                * h;
            (-(j as f64 * PI).powi(2) * tau).exp() * (c[j - 1] + tau * d + dw[j - 1])
        })
        .collect()
}

#[test]
fn single_step_matches_straight_line_oracle() {
    let n = 64;
    let cfg = scheme(
        n,
        PolynomialDrift::allen_cahn(1.0),
        reference_taming(),
        NoiseSpec::white(),
        0.01,
        1.0,
        InitialCondition::sin_pi(),
    );
    let x = ModalState::unit(n, 1, 1.0);
    let zero = ModalState::zeros(n);
    let got = step(&x, &zero, &cfg).unwrap();
    let oracle = straight_line_step(x.coefficients(), zero.coefficients(), 1.0, 0.01, n, 4 * n);
    for (a, b) in got.coefficients().iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let c: Vec<f64> = (1..=n).map(|j| rng.random_range(-2.0..2.0) / j as f64).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..0.1)).collect();
        let got = step(&ModalState::new(c.clone()), &ModalState::new(w.clone()), &cfg).unwrap();
        let oracle = straight_line_step(&c, &w, 1.0, 0.01, n, 4 * n);
        for (a, b) in got.coefficients().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }
}

#[test]
fn untamed_step_is_classical_exponential_euler() {
    let n = 8;
    let cfg = scheme(
        n,
        PolynomialDrift::allen_cahn(2.0),
        TamingParams::untamed(),
        NoiseSpec::white(),
        0.003,
        1.0,
        InitialCondition::Zero,
    );
    let c: Vec<f64> = (1..=n).map(|j| 0.7 / j as f64).collect();
    let w = vec![0.0; n];
    let got = step(&ModalState::new(c.clone()), &ModalState::new(w.clone()), &cfg).unwrap();
    let h = 1.0 / (4 * n + 1) as f64;
    for j in 1..=n {
        let d: f64 = (1..=4 * n)
            .map(|i| {
                let x = i as f64 * h;
                let u: f64 = (1..=n).map(|m| c[m - 1] * SQRT_2 * (m as f64 * PI * x).sin()).sum();
                (2.0 * u - u * u * u) * SQRT_2 * (j as f64 * PI * x).sin()
            })
            .sum::<f64>()
            * h;
        let expected = (-eigenvalue(j) * 0.003).exp() * (c[j - 1] + 0.003 * d);
        assert!((got.coefficients()[j - 1] - expected).abs() < 1e-13);
    }
}

#[test]
fn linear_drift_follows_scalar_recursion() {
    let n = 6;
    let sigma = 3.0;
    let tau = 0.02;
    let cfg = scheme(
        n,
        PolynomialDrift::linear(sigma),
        TamingParams::untamed(),
        NoiseSpec::off(),
        tau,
        0.4,
        InitialCondition::Modal(vec![1.0, -0.5, 0.25, 0.0, 2.0, 1.0]),
    );
    let record = simulate_path(
        &cfg,
        &NoiseStream::new(0, 0, cfg.steps as u64),
        &Checkpoints {
            keep_states: true,
            ..Checkpoints::at(vec![0.4])
        },
    )
    .unwrap();
    let last = &record.states.unwrap()[0];
    let c0 = [1.0, -0.5, 0.25, 0.0, 2.0, 1.0];
    for j in 1..=n {
        let factor = (-eigenvalue(j) * tau).exp() * (1.0 + tau * sigma);
        let expected = c0[j - 1] * factor.powi(20);
        assert!((last.coefficients()[j - 1] - expected).abs() <= 1e-12 * expected.abs() + 1e-15);
    }
}

#[test]
fn pure_decay_over_unit_time() {
    for tau in [0.5, 0.1, 0.01, 1.0 / 3.0] {
        let cfg = scheme(
            8,
            PolynomialDrift::zero(),
            TamingParams::untamed(),
            NoiseSpec::off(),
            tau,
            1.0,
            InitialCondition::Sine {
                amplitude: 3.0,
                wavenumber: 1,
            },
        );
        let record = simulate_path(&cfg, &NoiseStream::new(0, 0, cfg.steps as u64), &Checkpoints::at(vec![0.0, cfg.horizon()]))
            .unwrap();
        let h0 = record.h_norm[0];
        assert!((record.h_norm[1] - (-PI * PI).exp() * h0).abs() < 1e-12, "tau={tau}");
    }
}

#[test]
fn batched_ensemble_matches_single_paths() {
    for (n, k) in [(16, 64), (12, 37), (1, 4)] {
        let basis = Arc::new(SpectralBasis::new(n, k).unwrap());
        let tamed = TamedNonlinearity::new_unchecked(
            PolynomialDrift::allen_cahn(10.0),
            DriftConstants::allen_cahn(10.0),
            reference_taming(),
            eigenvalue(n),
        );
        let cfg = SchemeConfig::new(
            basis,
            0.01,
            2.0,
            tamed,
            NoiseSpec::trace_class(),
            InitialCondition::Sine {
                amplitude: 5.0,
                wavenumber: 1,
            },
            99,
        )
        .unwrap();
        let checkpoints = Checkpoints {
            times: vec![0.0, 0.5, 2.0],
            observables: vec![tamed_spde::experiments::TestFunction::SinNorm],
            keep_states: true,
        };
        let records = run_ensemble(&cfg, 30..71, &checkpoints, 3).unwrap();
        assert_eq!(records.len(), 41);
        for rec in &records {
            let single = simulate_path(&cfg, &NoiseStream::new(99, rec.sample_id, cfg.steps as u64), &checkpoints).unwrap();
            assert_eq!(rec.times, single.times);
            let (a, b) = (rec.states.as_ref().unwrap(), single.states.as_ref().unwrap());
            for (x, y) in a.iter().zip(b) {
                for (p, q) in x.coefficients().iter().zip(y.coefficients()) {
                    assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()), "N={n} K={k}: {p} vs {q}");
                }
            }
            for (p, q) in rec.v_norm.iter().zip(&single.v_norm) {
                assert!((p - q).abs() <= 1e-10 * (1.0 + q.abs()));
            }
        }
    }
}

#[test]
fn ensemble_is_independent_of_worker_count() {
    let cfg = scheme(
        16,
        PolynomialDrift::allen_cahn(1.0),
        reference_taming(),
        NoiseSpec::white(),
        0.01,
        1.0,
        InitialCondition::sin_pi(),
    );
    let checkpoints = Checkpoints::at(vec![0.0, 0.5, 1.0]);
    let one = run_ensemble(&cfg, 0..100, &checkpoints, 1).unwrap();
    let four = run_ensemble(&cfg, 0..100, &checkpoints, 4).unwrap();
    assert_eq!(one, four);
}

#[test]
fn convolution_single_term_and_empty_sum() {
    let spec = NoiseSpec::white();
    let stream = NoiseStream::new(5, 0, 10);
    let basis = SpectralBasis::with_default_grid(16).unwrap();
    assert_eq!(discretized_convolution(&stream, &spec, 16, 0.01, 0).unwrap(), ModalState::zeros(16));
    let one = discretized_convolution(&stream, &spec, 16, 0.01, 1).unwrap();
    let direct = apply_semigroup(&sample_increment(&stream, &spec, 16, 0, 0.01).unwrap(), 0.01, &basis).unwrap();
    assert_eq!(one, direct);
}

#[test]
fn convolution_second_moment_matches_closed_form() {
    let (n, tau, m, samples) = (64usize, 0.01, 1000usize, 10_000u64);
    let spec = NoiseSpec::white();
    let values: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let o = discretized_convolution(&NoiseStream::new(77, s, m as u64), &spec, n, tau, m).unwrap();
            o.h_norm().powi(2)
        })
        .collect();
    let mean = values.iter().sum::<f64>() / samples as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
    let se = (var / samples as f64).sqrt();
    let analytic: f64 = (1..=n)
        .map(|j| {
            let l = (j as f64 * PI).powi(2);
            tau * (0..m).map(|k| (-2.0 * l * (m - k) as f64 * tau).exp()).sum::<f64>()
        })
        .sum();
    assert!((mean - analytic).abs() < 3.0 * se, "{mean} vs {analytic} (se {se})");
}

#[test]
fn reference_setup_stays_bounded() {
    let cfg = scheme(
        64,
        PolynomialDrift::allen_cahn(1.0),
        reference_taming(),
        NoiseSpec::white(),
        0.01,
        10.0,
        InitialCondition::sin_pi(),
    );
    let times: Vec<f64> = (0..=10).map(|t| t as f64).collect();
    let records = run_ensemble(&cfg, 0..64, &Checkpoints::at(times), 2).unwrap();
    for r in &records {
        assert!(!r.blew_up());
        assert!(r.v_norm.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn untamed_large_step_blows_up() {
    let cfg = scheme(
        16,
        PolynomialDrift::allen_cahn(1.0),
        TamingParams::untamed(),
        NoiseSpec::white(),
        0.5,
        10.0,
        InitialCondition::Sine {
            amplitude: 50.0,
            wavenumber: 1,
        },
    );
    assert!(!cfg.admissible);
    let times: Vec<f64> = (0..=20).map(|m| m as f64 * 0.5).collect();
    let records = run_ensemble(&cfg, 0..40, &Checkpoints::at(times), 1).unwrap();
    let series = moment_monitor(&records, 4).unwrap();
    assert!(series.blow_up_fraction > 0.0);
    assert_eq!(series.samples, 40);
}

#[test]
fn moments_decay_without_noise_or_drift() {
    let cfg = scheme(
        8,
        PolynomialDrift::zero(),
        TamingParams::untamed(),
        NoiseSpec::off(),
        0.01,
        1.0,
        InitialCondition::Sine {
            amplitude: 2.0,
            wavenumber: 3,
        },
    );
    let times: Vec<f64> = (0..=10).map(|m| m as f64 * 0.1).collect();
    let records = run_ensemble(&cfg, 0..30, &Checkpoints::at(times), 1).unwrap();
    let series = moment_monitor(&records, 4).unwrap();
    assert!(series.mean_v.windows(2).all(|w| w[1] < w[0]));
    assert!(series.mean_h.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(series.blow_up_fraction, 0.0);
}
