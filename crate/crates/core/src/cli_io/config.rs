//! Run configuration: flat TOML sections, presets and validation.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result, Violation};
use crate::experiments::TestFunction;
use crate::integrator::{InitialCondition, SchemeConfig};
use crate::model::{
    check_admissibility, validate_drift_constants, Admissibility, DriftConstants, PolynomialDrift,
    Sweep, TamedNonlinearity, TamingParams,
};
use crate::noise::{LogBase, NoiseKind, NoiseSpec};
use crate::spectral::SpectralBasis;

pub const PRESETS: [&str; 2] = ["white-contractive", "trace-noncontractive"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    #[serde(default)]
    pub taming: TamingParams,
    pub noise: NoiseSection,
    pub discretization: DiscretizationSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

/// Either `sigma` (for `σu − u³`) or explicit `coefficients` `a_0..a_{2q−1}`.
/// Constants default to the cubic's values and are required otherwise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c4: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c5: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKindName {
    White,
    TraceClass,
    Custom,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKindName,
    #[serde(default)]
    pub log_base: LogBase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Diagonal `q_1, q_2, ...` for `kind = "custom"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
}

/// `n` modes on `k` nodes (default `4n`); give `tau` or `steps` with `horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationSection {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub samples: u64,
    /// Paths recorded by `simulate`.
    pub trajectories: u64,
    pub initial: InitialCondition,
    pub initials: Vec<InitialCondition>,
    pub phis: Vec<TestFunction>,
    /// Spacing of recorded checkpoints.
    pub checkpoint_every: f64,
    pub weak_horizon: f64,
    /// Coarse step counts over `weak_horizon`.
    pub levels: Vec<usize>,
    pub reference_steps: usize,
    /// Truncations for the spatial sweep; empty disables it.
    pub spatial_dims: Vec<usize>,
    pub reference_dim: usize,
    pub slope_window: Option<[f64; 2]>,
    pub bins: usize,
    /// Defaults to half of the configured steps.
    pub burn_in_steps: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            samples: 2000,
            trajectories: 16,
            initial: InitialCondition::sin_pi(),
            initials: default_initials(),
            phis: TestFunction::DEFAULT_SET.to_vec(),
            checkpoint_every: 1.0,
            weak_horizon: 10.0,
            levels: vec![16, 32, 64, 128, 256],
            reference_steps: 2048,
            spatial_dims: Vec::new(),
            reference_dim: 128,
            slope_window: None,
            bins: 40,
            burn_in_steps: None,
        }
    }
}

/// `0, sin(πx), 5 sin(πx), −5 sin(πx), 2 sin(3πx)`.
pub fn default_initials() -> Vec<InitialCondition> {
    vec![
        InitialCondition::Zero,
        InitialCondition::sin_pi(),
        InitialCondition::Sine { amplitude: 5.0, wavenumber: 1 },
        InitialCondition::Sine { amplitude: -5.0, wavenumber: 1 },
        InitialCondition::Sine { amplitude: 2.0, wavenumber: 3 },
    ]
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (sigma, kind, window) = match name {
            "white-contractive" => (1.0, NoiseKindName::White, [0.3, 0.7]),
            "trace-noncontractive" => (10.0, NoiseKindName::TraceClass, [0.75, 1.25]),
            _ => {
                return Err(Error::Parse(format!(
                    "unknown preset `{name}`; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self {
            seed: 20240601,
            model: ModelSection {
                sigma: Some(sigma),
                ..ModelSection::default()
            },
            taming: TamingParams::default(),
            noise: NoiseSection {
                kind,
                log_base: LogBase::Natural,
                gamma: None,
                q: None,
            },
            discretization: DiscretizationSection {
                n: 64,
                k: None,
                tau: Some(0.01),
                steps: None,
                horizon: 100.0,
            },
            experiment: ExperimentSection {
                slope_window: Some(window),
                ..ExperimentSection::default()
            },
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form; independent of key order,
    /// formatting and explicitly written defaults.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }

    pub fn drift(&self) -> Result<PolynomialDrift> {
        let m = &self.model;
        let drift = match (&m.coefficients, m.sigma) {
            (Some(_), Some(_)) => {
                return Err(Error::Parse("model: give either sigma or coefficients, not both".into()))
            }
            (Some(c), None) => PolynomialDrift::new(c.clone())?,
            (None, s) => PolynomialDrift::allen_cahn(s.unwrap_or(1.0)),
        };
        if let Some(q) = m.q {
            if q != drift.q() {
                return Err(Error::Parse(format!(
                    "model: q = {q} disagrees with {} coefficients",
                    drift.coefficients().len()
                )));
            }
        }
        Ok(drift)
    }

    pub fn constants(&self) -> Result<DriftConstants> {
        let m = &self.model;
        let base = match (&m.coefficients, m.sigma) {
            (None, s) => Some(DriftConstants::allen_cahn(s.unwrap_or(1.0))),
            _ => None,
        };
        let pick = |v: Option<f64>, d: Option<f64>, name: &str| {
            v.or(d).ok_or_else(|| {
                Error::Parse(format!("model: `{name}` is required with explicit coefficients"))
            })
        };
        Ok(DriftConstants {
            c0: pick(m.c0, base.map(|b| b.c0), "c0")?,
            c1: pick(m.c1, base.map(|b| b.c1), "c1")?,
            c2: pick(m.c2, base.map(|b| b.c2), "c2")?,
            c3: pick(m.c3, base.map(|b| b.c3), "c3")?,
            c4: pick(m.c4, base.map(|b| b.c4), "c4")?,
            c5: pick(m.c5, base.map(|b| b.c5), "c5")?,
            lipschitz: pick(m.lipschitz, base.map(|b| b.lipschitz), "lipschitz")?,
            growth: pick(m.growth, base.map(|b| b.growth), "growth")?,
        })
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        let n = &self.noise;
        let mut spec = match n.kind {
            NoiseKindName::White => NoiseSpec::white(),
            NoiseKindName::TraceClass => NoiseSpec::trace_class(),
            NoiseKindName::Off => NoiseSpec::off(),
            NoiseKindName::Custom => NoiseSpec {
                kind: NoiseKind::CustomDiagonal(n.q.clone().ok_or_else(|| {
                    Error::Parse("noise: kind = \"custom\" needs `q`".into())
                })?),
                log_base: LogBase::Natural,
                gamma_label: 1.0,
            },
        };
        spec.log_base = n.log_base;
        if let Some(g) = n.gamma {
            spec.gamma_label = g;
        }
        Ok(spec)
    }

    /// `(τ, M)` with `M τ = T`.
    pub fn time_grid(&self) -> Result<(f64, usize)> {
        let d = &self.discretization;
        match (d.tau, d.steps) {
            (Some(tau), None) => Ok((tau, (d.horizon / tau).round() as usize)),
            (None, Some(0)) if d.horizon == 0.0 => Ok((1.0, 0)),
            (None, Some(0)) => Err(Error::Parse("discretization: steps = 0 needs horizon = 0".into())),
            (None, Some(m)) => Ok((d.horizon / m as f64, m)),
            _ => Err(Error::Parse(
                "discretization: give exactly one of `tau` and `steps`".into(),
            )),
        }
    }

    /// Checks every structural condition and builds the scheme.
    pub fn validate(&self) -> Result<ValidatedConfig> {
        let drift = self.drift().map_err(|e| match e {
            Error::InvalidParameter(m) => Error::Validation(vec![Violation::new("drift", m)]),
            e => e,
        })?;
        let constants = self.constants()?;
        let noise = self.noise_spec()?;
        let (tau, steps) = self.time_grid()?;
        let d = &self.discretization;
        let e = &self.experiment;

        let mut violations = Vec::new();
        let grid = d.k.unwrap_or(4 * d.n);
        if d.n == 0 || grid < d.n {
            violations.push(Violation::new(
                "discretization",
                format!("need 1 <= n <= k, got n={} k={grid}", d.n),
            ));
        }
        if !(tau > 0.0) || !(d.horizon >= 0.0) {
            violations.push(Violation::new(
                "discretization",
                format!("tau={tau} must be positive and horizon={} nonnegative", d.horizon),
            ));
        }
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        let basis = Arc::new(SpectralBasis::new(d.n, grid)?);
        let tamed = match TamedNonlinearity::new(drift, constants, self.taming, basis.top_eigenvalue()) {
            Ok(t) => Some(t),
            Err(Error::Validation(v)) => {
                violations.extend(v);
                None
            }
            Err(other) => return Err(other),
        };
        if let Err(err) = noise.coefficients(d.n) {
            violations.push(Violation::new("noise-nondegenerate", err.to_string()));
        }
        if e.samples == 0 || !(e.checkpoint_every > 0.0) || !(e.weak_horizon > 0.0) || e.bins == 0 {
            violations.push(Violation::new(
                "experiment",
                "samples, bins, checkpoint_every and weak_horizon must be positive",
            ));
        }
        if e.initials.len() < 2 {
            violations.push(Violation::new("experiment", "need at least two initial values"));
        }
        let Some(tamed) = tamed else {
            return Err(Error::Validation(violations));
        };

        let admissibility = match check_admissibility(tau, &tamed) {
            // no step is taken
            Ok(a) if steps == 0 => Some(a),
            Ok(a) => {
                if !a.passed {
                    violations.push(Violation::new(
                        "admissibility",
                        format!("tau={tau} > tau_crit={:.4}", a.tau_crit),
                    ));
                }
                Some(a)
            }
            Err(err) => {
                violations.push(Violation::new("admissibility", err.to_string()));
                None
            }
        };
        if steps > 0 && tau > self.taming.tau_max {
            violations.push(Violation::new(
                "admissibility",
                format!("tau={tau} exceeds tau_max={}", self.taming.tau_max),
            ));
        }
        let drift_report = validate_drift_constants(&tamed.drift, &tamed.constants, &Sweep::default())?;
        for check in drift_report.checks.iter().filter(|c| !c.passed) {
            violations.push(Violation::new(
                "drift-constants",
                format!(
                    "{} fails at (u, v) = ({}, {})",
                    check.name, check.witness.0, check.witness.1
                ),
            ));
        }
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }

        let scheme = SchemeConfig::new(
            basis,
            tau,
            steps as f64 * tau,
            tamed,
            noise,
            e.initial.clone(),
            self.seed,
        )?;
        let summary = ValidationSummary {
            passed: true,
            violations: Vec::new(),
            admissibility,
            contractive: drift_report.contractive,
            lambda_n: scheme.basis.top_eigenvalue(),
        };
        Ok(ValidatedConfig {
            config: self.clone(),
            scheme,
            summary,
        })
    }

    /// Checks experiment-specific sample minima.
    pub fn check_samples(&self, minimum: u64) -> Result<()> {
        if self.experiment.samples < minimum {
            return Err(Error::Validation(vec![Violation::new(
                "experiment",
                format!("samples={} below the minimum {minimum}", self.experiment.samples),
            )]));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationSummary {
    pub passed: bool,
    pub violations: Vec<Violation>,
    pub admissibility: Option<Admissibility>,
    /// `L_f < λ_1`.
    pub contractive: bool,
    pub lambda_n: f64,
}

impl ValidationSummary {
    pub fn rejected(violations: Vec<Violation>) -> Self {
        Self {
            passed: false,
            violations,
            admissibility: None,
            contractive: false,
            lambda_n: f64::NAN,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub config: RunConfig,
    pub scheme: SchemeConfig,
    pub summary: ValidationSummary,
}

/// Reads and validates a TOML run configuration.
pub fn load_and_validate(path: &Path) -> Result<ValidatedConfig> {
    let text = std::fs::read_to_string(path)?;
    RunConfig::from_toml_str(&text)?.validate()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        let white = RunConfig::preset("white-contractive").unwrap().validate().unwrap();
        assert!(white.summary.contractive);
        let trace = RunConfig::preset("trace-noncontractive").unwrap().validate().unwrap();
        assert!(!trace.summary.contractive);
        assert!(RunConfig::preset("nope").is_err());
    }

    #[test]
    fn exponent_constraint_rejected() {
        let mut cfg = RunConfig::preset("white-contractive").unwrap();
        cfg.taming.alpha = 0.5;
        cfg.taming.rho = 2.0;
        let Err(Error::Validation(v)) = cfg.validate() else {
            panic!("expected rejection");
        };
        assert!(v.iter().any(|v| v.tag == "taming-exponents" && v.message.contains("0.75")), "{v:?}");
    }

    #[test]
    fn large_stepsize_rejected_with_threshold() {
        let mut cfg = RunConfig::preset("white-contractive").unwrap();
        cfg.discretization.tau = Some(0.5);
        let Err(Error::Validation(v)) = cfg.validate() else {
            panic!("expected rejection");
        };
        let msg = v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n");
        assert!(msg.contains("admissibility: tau=0.5 > tau_crit=0.1170"), "{msg}");
    }

    #[test]
    fn toml_round_trip_keeps_hash() {
        let cfg = RunConfig::preset("trace-noncontractive").unwrap();
        let back = RunConfig::from_toml_str(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn reordered_keys_hash_equal() {
        let a = "seed = 3\n[model]\nsigma = 1.0\n[noise]\nkind = \"white\"\n\
                 [discretization]\nn = 8\ntau = 0.01\nhorizon = 1.0\n";
        let b = "seed = 3\n[discretization]\nhorizon = 1.0\ntau = 0.01\nn = 8\n\
                 [noise]\nkind = \"white\"\nlog_base = \"natural\"\n[model]\nsigma = 1.0\n";
        let (a, b) = (RunConfig::from_toml_str(a).unwrap(), RunConfig::from_toml_str(b).unwrap());
        assert_eq!(a.hash(), b.hash());
        let mut c = a.clone();
        c.seed = 4;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[model]\nsigma = 1.0\nsigmaa = 2.0\n[noise]\nkind = \"white\"\n\
                    [discretization]\nn = 8\ntau = 0.01\nhorizon = 1.0\n";
        assert!(matches!(RunConfig::from_toml_str(text), Err(Error::Parse(_))));
    }

    #[test]
    fn general_polynomial_needs_constants() {
        let mut cfg = RunConfig::preset("white-contractive").unwrap();
        cfg.model.sigma = None;
        cfg.model.coefficients = Some(vec![0.0, 1.0, 0.0, -1.0]);
        assert!(matches!(cfg.validate(), Err(Error::Parse(_))));
    }
}
