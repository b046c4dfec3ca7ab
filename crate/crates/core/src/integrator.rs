//! Tamed exponential Euler stepping on the spectral Galerkin space:
//!
//! ```text
//! X_{m+1} = E_N(τ) (X_m + τ P_N F_{τ,N}(X_m) + P_N ΔW_m),   X_0 = P_N X(0)
//! ```

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::experiments::TestFunction;
use crate::model::{check_admissibility, TamedNonlinearity, TamingKernel};
use crate::noise::{increment_scales, sample_increment, NoiseSpec, NoiseStream};
use crate::spectral::{sup_norm, ModalState, SpectralBasis};

/// Paths whose H-norm exceeds this are treated as blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Initial value `X(0)`, projected onto the retained modes.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Zero,
    /// `amplitude · sin(wavenumber · πx)`.
    Sine { amplitude: f64, wavenumber: usize },
    Modal(Vec<f64>),
}

impl InitialCondition {
    /// The preset `sin(πx)`.
    pub fn sin_pi() -> Self {
        Self::Sine {
            amplitude: 1.0,
            wavenumber: 1,
        }
    }

    /// `P_N X(0)` as modal coefficients; `a sin(kπx) = (a/√2) e_k`.
    pub fn project(&self, dim: usize) -> ModalState {
        match self {
            Self::Zero => ModalState::zeros(dim),
            Self::Sine {
                amplitude,
                wavenumber,
            } => {
                let mut c = vec![0.0; dim];
                if (1..=dim).contains(wavenumber) {
                    c[wavenumber - 1] = amplitude / std::f64::consts::SQRT_2;
                }
                ModalState::new(c)
            }
            Self::Modal(coeffs) => {
                let mut c = vec![0.0; dim];
                let n = coeffs.len().min(dim);
                c[..n].copy_from_slice(&coeffs[..n]);
                ModalState::new(c)
            }
        }
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "0"),
            Self::Sine {
                amplitude,
                wavenumber,
            } => {
                let wave = if *wavenumber == 1 {
                    "sin(pi*x)".to_string()
                } else {
                    format!("sin({wavenumber}*pi*x)")
                };
                if *amplitude == 1.0 {
                    write!(f, "{wave}")
                } else {
                    write!(f, "{amplitude}*{wave}")
                }
            }
            Self::Modal(c) => {
                let parts: Vec<String> = c.iter().map(|v| v.to_string()).collect();
                write!(f, "modal:{}", parts.join(","))
            }
        }
    }
}

/// Parses `0`, `sin(pi*x)`, `-5*sin(pi*x)`, `2*sin(3*pi*x)` or `modal:c1,c2,...`.
impl FromStr for InitialCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let compact = compact.replace('π', "pi");
        let bad = || Error::Parse(format!("unrecognized initial condition `{s}`"));
        if let Some(rest) = compact.strip_prefix("modal:") {
            let coeffs = rest
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|_| bad()))
                .collect::<Result<Vec<_>>>()?;
            return Ok(Self::Modal(coeffs));
        }
        if let Ok(v) = compact.parse::<f64>() {
            return if v == 0.0 { Ok(Self::Zero) } else { Err(bad()) };
        }
        let start = compact.find("sin(").ok_or_else(bad)?;
        let amplitude = match compact[..start].trim_end_matches('*') {
            "" | "+" => 1.0,
            "-" => -1.0,
            a => a.parse::<f64>().map_err(|_| bad())?,
        };
        let inner = compact[start + 4..].strip_suffix(')').ok_or_else(bad)?;
        let wave = inner.strip_suffix("x").ok_or_else(bad)?;
        let wave = wave.strip_suffix('*').unwrap_or(wave);
        let wave = wave.strip_suffix("pi").ok_or_else(bad)?;
        let wavenumber = match wave.trim_end_matches('*') {
            "" => 1,
            k => k.parse::<usize>().map_err(|_| bad())?,
        };
        if wavenumber == 0 {
            return Err(bad());
        }
        Ok(Self::Sine {
            amplitude,
            wavenumber,
        })
    }
}

impl Serialize for InitialCondition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for InitialCondition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One full discretization: basis, stepsize, horizon, drift, noise.
#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub basis: Arc<SpectralBasis>,
    pub tau: f64,
    pub steps: usize,
    pub tamed: TamedNonlinearity,
    pub noise: NoiseSpec,
    pub initial: InitialCondition,
    pub seed: u64,
    /// Whether the stepsize satisfies the taming admissibility condition.
    pub admissible: bool,
}

impl SchemeConfig {
    /// `horizon` is rounded to the nearest multiple of `tau`.
    pub fn new(
        basis: Arc<SpectralBasis>,
        tau: f64,
        horizon: f64,
        tamed: TamedNonlinearity,
        noise: NoiseSpec,
        initial: InitialCondition,
        seed: u64,
    ) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(invalid(format!("stepsize must be positive, got {tau}")));
        }
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(invalid(format!("horizon must be nonnegative, got {horizon}")));
        }
        let rel = (tamed.lambda_n - basis.top_eigenvalue()).abs() / basis.top_eigenvalue();
        if rel > 1e-12 {
            return Err(invalid(format!(
                "taming uses lambda_N = {} but the basis has lambda_N = {}",
                tamed.lambda_n,
                basis.top_eigenvalue()
            )));
        }
        noise.coefficients(basis.dim())?;
        let steps = (horizon / tau).round() as usize;
        let admissible = match check_admissibility(tau, &tamed) {
            Ok(a) => a.passed && tau <= tamed.taming.tau_max,
            Err(_) => false,
        };
        Ok(Self {
            basis,
            tau,
            steps,
            tamed,
            noise,
            initial,
            seed,
            admissible,
        })
    }

    /// `T = M τ`.
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.tau
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn initial_state(&self) -> ModalState {
        self.initial.project(self.dim())
    }

    /// Same scheme with a different stepsize and horizon `M τ`.
    pub fn with_steps(&self, tau: f64, steps: usize) -> Self {
        let admissible = match check_admissibility(tau, &self.tamed) {
            Ok(a) => a.passed && tau <= self.tamed.taming.tau_max,
            Err(_) => false,
        };
        Self {
            tau,
            steps,
            admissible,
            ..self.clone()
        }
    }

    pub fn with_initial(&self, initial: InitialCondition) -> Self {
        Self {
            initial,
            ..self.clone()
        }
    }

    /// Step index of checkpoint time `t`, which must lie on the time grid.
    pub fn step_index(&self, t: f64) -> Result<usize> {
        let m = (t / self.tau).round();
        if !(m >= 0.0) || (m * self.tau - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(invalid(format!("checkpoint t={t} is not on the grid of tau={}", self.tau)));
        }
        let m = m as usize;
        if m > self.steps {
            return Err(invalid(format!("checkpoint t={t} beyond the horizon {}", self.horizon())));
        }
        Ok(m)
    }

    /// Step indices of strictly increasing checkpoint times.
    pub fn checkpoint_steps(&self, times: &[f64]) -> Result<Vec<usize>> {
        let steps = times.iter().map(|&t| self.step_index(t)).collect::<Result<Vec<_>>>()?;
        if steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("checkpoint times must be strictly increasing"));
        }
        Ok(steps)
    }
}

/// Reusable single-path stepper with preallocated buffers.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    basis: &'a SpectralBasis,
    kernel: TamingKernel,
    decay: Vec<f64>,
    tau: f64,
    grid: Vec<f64>,
    work: Vec<f64>,
    drift: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(basis: &'a SpectralBasis, tamed: &TamedNonlinearity, tau: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(invalid(format!("stepsize must be positive, got {tau}")));
        }
        Ok(Self {
            basis,
            kernel: tamed.kernel(tau),
            decay: basis.decay_factors(tau)?,
            tau,
            grid: vec![0.0; basis.grid_size()],
            work: vec![0.0; basis.grid_size()],
            drift: vec![0.0; basis.dim()],
        })
    }

    /// Nodal values of `state`; kept for the next [`Stepper::step_from_grid`].
    pub fn synthesize(&mut self, state: &[f64]) -> &[f64] {
        self.basis.synthesize_into(state, &mut self.grid);
        &self.grid
    }

    /// One scheme step using the grid from the last [`Stepper::synthesize`].
    /// Returns `false` if the new state is non-finite or exceeds the blow-up threshold.
    pub fn step_from_grid(&mut self, state: &mut [f64], increment: &[f64]) -> bool {
        self.work.copy_from_slice(&self.grid);
        self.kernel.apply_slice(&mut self.work);
        self.basis.analyze_into(&self.work, &mut self.drift);
        let tau = self.tau;
        let mut norm2 = 0.0;
        for (((x, d), w), e) in state.iter_mut().zip(&self.drift).zip(increment).zip(&self.decay) {
            *x = e * (*x + tau * d + w);
            norm2 += *x * *x;
        }
        norm2.is_finite() && norm2 <= BLOW_UP_THRESHOLD * BLOW_UP_THRESHOLD
    }

    pub fn step(&mut self, state: &mut [f64], increment: &[f64]) -> bool {
        self.basis.synthesize_into(state, &mut self.grid);
        self.step_from_grid(state, increment)
    }
}

/// One scheme step from `x` with noise increment `dw`.
pub fn step(x: &ModalState, dw: &ModalState, cfg: &SchemeConfig) -> Result<ModalState> {
    for s in [x, dw] {
        if s.len() != cfg.dim() {
            return Err(Error::DimensionMismatch {
                expected: cfg.dim(),
                found: s.len(),
            });
        }
    }
    let mut stepper = Stepper::new(&cfg.basis, &cfg.tamed, cfg.tau)?;
    let mut out = x.clone();
    if stepper.step(out.coefficients_mut(), dw.coefficients()) {
        Ok(out)
    } else {
        Err(Error::BlowUp {
            step: 0,
            time: 0.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlowUpInfo {
    /// Index of the step whose result was non-finite or too large.
    pub step: usize,
    pub time: f64,
}

/// Checkpointed diagnostics of one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub sample_id: u64,
    pub times: Vec<f64>,
    pub h_norm: Vec<f64>,
    pub v_norm: Vec<f64>,
    /// `observables[c][k]` is test function `k` at checkpoint `c`.
    pub observables: Vec<Vec<f64>>,
    pub states: Option<Vec<ModalState>>,
    pub blow_up: Option<BlowUpInfo>,
}

impl TrajectoryRecord {
    pub(crate) fn new(sample_id: u64, keep_states: bool) -> Self {
        Self {
            sample_id,
            times: Vec::new(),
            h_norm: Vec::new(),
            v_norm: Vec::new(),
            observables: Vec::new(),
            states: keep_states.then(Vec::new),
            blow_up: None,
        }
    }

    pub(crate) fn push(&mut self, t: f64, state: &[f64], grid: &[f64], observables: &[TestFunction]) {
        let h = state.iter().map(|c| c * c).sum::<f64>().sqrt();
        self.times.push(t);
        self.h_norm.push(h);
        self.v_norm.push(sup_norm(grid));
        self.observables
            .push(observables.iter().map(|phi| phi.eval_coefficients(state)).collect());
        if let Some(states) = &mut self.states {
            states.push(ModalState::new(state.to_vec()));
        }
    }

    pub fn blew_up(&self) -> bool {
        self.blow_up.is_some()
    }
}

/// What to record along a path.
#[derive(Debug, Clone, Default)]
pub struct Checkpoints {
    pub times: Vec<f64>,
    pub observables: Vec<TestFunction>,
    pub keep_states: bool,
}

impl Checkpoints {
    pub fn at(times: Vec<f64>) -> Self {
        Self {
            times,
            ..Self::default()
        }
    }
}

/// Runs `cfg.steps` scheme steps driven by `stream`.
///
/// The stream's fine grid must be a multiple `r` of the scheme's grid; each
/// scheme increment is then the sum of `r` fine increments. A blow-up stops
/// the path and is flagged in the record, which keeps all earlier checkpoints.
pub fn simulate_path(
    cfg: &SchemeConfig,
    stream: &NoiseStream,
    checkpoints: &Checkpoints,
) -> Result<TrajectoryRecord> {
    let marks = cfg.checkpoint_steps(&checkpoints.times)?;
    let ratio = fine_ratio(cfg.steps, stream.fine_steps)?;
    let dim = cfg.dim();
    let noisy = !cfg.noise.is_off();
    let scales = if noisy {
        increment_scales(&cfg.noise, dim, cfg.tau / ratio as f64)?
    } else {
        vec![0.0; dim]
    };
    let mut stepper = Stepper::new(&cfg.basis, &cfg.tamed, cfg.tau)?;
    let mut reader = stream.reader();
    let mut state = cfg.initial_state().into_inner();
    let mut increment = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut record = TrajectoryRecord::new(stream.sample_index, checkpoints.keep_states);
    let mut next = marks.iter().peekable();

    for m in 0..=cfg.steps {
        stepper.synthesize(&state);
        if next.peek() == Some(&&m) {
            next.next();
            record.push(m as f64 * cfg.tau, &state, &stepper.grid, &checkpoints.observables);
        }
        if m == cfg.steps {
            break;
        }
        if noisy {
            crate::noise::accumulate_increments(
                &mut reader,
                &scales,
                m as u64 * ratio,
                ratio,
                &mut scratch,
                &mut increment,
            );
        }
        if !stepper.step_from_grid(&mut state, &increment) {
            record.blow_up = Some(BlowUpInfo {
                step: m + 1,
                time: (m + 1) as f64 * cfg.tau,
            });
            break;
        }
    }
    Ok(record)
}

/// Number of fine steps per scheme step.
pub(crate) fn fine_ratio(steps: usize, fine_steps: u64) -> Result<u64> {
    if steps == 0 {
        return Ok(1);
    }
    if fine_steps == 0 || fine_steps % steps as u64 != 0 {
        return Err(invalid(format!(
            "noise grid of {fine_steps} fine steps is not a refinement of {steps} scheme steps"
        )));
    }
    Ok(fine_steps / steps as u64)
}

/// `O_{t_m} = Σ_{k<m} E_N(t_m − t_k) P_N ΔW_k`, accumulated as
/// `O_{k+1} = E_N(τ)(O_k + ΔW_k)` with increments at the stream's fine steps.
pub fn discretized_convolution(
    stream: &NoiseStream,
    spec: &NoiseSpec,
    dim: usize,
    tau: f64,
    m: usize,
) -> Result<ModalState> {
    if !(tau > 0.0) {
        return Err(invalid(format!("stepsize must be positive, got {tau}")));
    }
    let decay: Vec<f64> = (1..=dim)
        .map(|j| (-crate::spectral::eigenvalue(j) * tau).exp())
        .collect();
    let mut acc = vec![0.0; dim];
    for k in 0..m {
        let dw = sample_increment(stream, spec, dim, k as u64, tau)?;
        for ((o, w), e) in acc.iter_mut().zip(dw.coefficients()).zip(&decay) {
            *o = e * (*o + w);
        }
    }
    Ok(ModalState::new(acc))
}

/// Per-checkpoint sample moments of `‖X‖_V^p` and `‖X‖_H^p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSeries {
    pub p: u32,
    pub times: Vec<f64>,
    pub mean_v: Vec<f64>,
    pub stderr_v: Vec<f64>,
    pub mean_h: Vec<f64>,
    pub stderr_h: Vec<f64>,
    /// Running supremum of `mean_v` over checkpoints.
    pub running_sup_v: Vec<f64>,
    pub running_sup_h: Vec<f64>,
    pub samples: usize,
    pub blow_ups: usize,
    pub blow_up_fraction: f64,
}

impl MomentSeries {
    /// `sup mean ‖X‖_V^p` over checkpoints with `t ∈ [lo, hi]`.
    pub fn sup_v_over(&self, lo: f64, hi: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.mean_v)
            .filter(|(t, _)| (lo..=hi).contains(*t))
            .map(|(_, m)| *m)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Sample moments across paths sharing one checkpoint schedule. Blown-up
/// paths are counted in `blow_up_fraction` and excluded from the means.
pub fn moment_monitor(records: &[TrajectoryRecord], p: u32) -> Result<MomentSeries> {
    if p == 0 {
        return Err(invalid("moment order must be at least 1"));
    }
    if records.len() < 30 {
        return Err(Error::InsufficientData(format!(
            "moment monitor needs at least 30 paths, got {}",
            records.len()
        )));
    }
    let blow_ups = records.iter().filter(|r| r.blew_up()).count();
    let live: Vec<&TrajectoryRecord> = records.iter().filter(|r| !r.blew_up()).collect();
    let times = live
        .first()
        .map(|r| r.times.clone())
        .unwrap_or_else(|| records[0].times.clone());
    if live.iter().any(|r| r.times != times) {
        return Err(invalid("records must share one checkpoint schedule"));
    }
    let mut out = MomentSeries {
        p,
        times: times.clone(),
        mean_v: Vec::new(),
        stderr_v: Vec::new(),
        mean_h: Vec::new(),
        stderr_h: Vec::new(),
        running_sup_v: Vec::new(),
        running_sup_h: Vec::new(),
        samples: records.len(),
        blow_ups,
        blow_up_fraction: blow_ups as f64 / records.len() as f64,
    };
    let (mut sup_v, mut sup_h) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in 0..times.len() {
        let v = crate::experiments::mean_stderr(live.iter().map(|r| r.v_norm[c].powi(p as i32)));
        let h = crate::experiments::mean_stderr(live.iter().map(|r| r.h_norm[c].powi(p as i32)));
        sup_v = sup_v.max(v.0);
        sup_h = sup_h.max(h.0);
        out.mean_v.push(v.0);
        out.stderr_v.push(v.1);
        out.mean_h.push(h.0);
        out.stderr_h.push(h.1);
        out.running_sup_v.push(sup_v);
        out.running_sup_h.push(sup_h);
    }
    Ok(out)
}
