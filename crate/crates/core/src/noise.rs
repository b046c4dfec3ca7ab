//! Q-Wiener increments in the Galerkin space.
//!
//! Draws are addressed by `(master seed, sample, fine step, mode)`. A ChaCha8
//! keystream keyed by the master seed is split into one stream per sample,
//! and each fine step owns a fixed window of that stream. Within a window,
//! normals are drawn in mode order by the ziggurat method, so the draw for
//! mode `j` does not depend on how many modes are requested.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::ModalState;

/// Upper bound on the number of addressable modes per step.
pub const MAX_MODES: usize = 1 << 14;
/// 32-bit keystream words reserved for each fine step.
const WORDS_PER_STEP: u128 = 2 * MAX_MODES as u128;

/// Base of the logarithm in the trace-class weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Ten,
    Two,
}

impl LogBase {
    fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Ten => x.log10(),
            LogBase::Two => x.log2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `Q = I`.
    White,
    /// `q_1 = 1`, `q_j = 1 / (1 + j log(j)²)`.
    TraceClass,
    CustomDiagonal(Vec<f64>),
    /// No noise; deterministic runs.
    Off,
}

/// Diagonal covariance of the driving Wiener process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    #[serde(default)]
    pub log_base: LogBase,
    /// Regularity exponent, for reporting only.
    pub gamma_label: f64,
}

impl NoiseSpec {
    pub fn white() -> Self {
        Self {
            kind: NoiseKind::White,
            log_base: LogBase::Natural,
            gamma_label: 0.5,
        }
    }

    pub fn off() -> Self {
        Self {
            kind: NoiseKind::Off,
            log_base: LogBase::Natural,
            gamma_label: 1.0,
        }
    }

    pub fn is_off(&self) -> bool {
        self.kind == NoiseKind::Off
    }

    pub fn trace_class() -> Self {
        Self {
            kind: NoiseKind::TraceClass,
            log_base: LogBase::Natural,
            gamma_label: 1.0,
        }
    }

    /// `q_j` for 1-based `j`.
    pub fn coefficient(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return Err(invalid("mode indices start at 1"));
        }
        Ok(match &self.kind {
            NoiseKind::White => 1.0,
            NoiseKind::Off => 0.0,
            NoiseKind::TraceClass if j == 1 => 1.0,
            NoiseKind::TraceClass => {
                let l = self.log_base.log(j as f64);
                1.0 / (1.0 + j as f64 * l * l)
            }
            NoiseKind::CustomDiagonal(q) => *q.get(j - 1).ok_or_else(|| {
                invalid(format!("custom covariance has {} entries, mode {j} requested", q.len()))
            })?,
        })
    }

    /// `q_1..q_N`, all required positive unless the noise is off.
    pub fn coefficients(&self, dim: usize) -> Result<Vec<f64>> {
        if self.is_off() {
            return Ok(vec![0.0; dim]);
        }
        let q = (1..=dim).map(|j| self.coefficient(j)).collect::<Result<Vec<_>>>()?;
        if let Some((j, v)) = q.iter().enumerate().find(|(_, v)| !(**v > 0.0) || !v.is_finite()) {
            return Err(invalid(format!("covariance q_{} = {v} must be positive", j + 1)));
        }
        Ok(q)
    }

    /// `Σ_{j≤N} q_j`.
    pub fn partial_trace(&self, dim: usize) -> Result<f64> {
        Ok(self.coefficients(dim)?.iter().sum())
    }
}

/// `q_j` of the noise specification.
pub fn covariance_coeff(spec: &NoiseSpec, j: usize) -> Result<f64> {
    spec.coefficient(j)
}

/// Counter-addressed Gaussian source for one Monte Carlo sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseStream {
    pub master_seed: u64,
    pub sample_index: u64,
    /// Number of steps on the finest time grid.
    pub fine_steps: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64, sample_index: u64, fine_steps: u64) -> Self {
        Self {
            master_seed,
            sample_index,
            fine_steps,
        }
    }

    /// Keystream cursor for this sample.
    pub fn reader(&self) -> NormalReader {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.sample_index);
        NormalReader { rng }
    }

    /// Standard normals for modes `1..=out.len()` at fine step `step`.
    pub fn standard_normals(&self, step: u64, out: &mut [f64]) {
        self.reader().fill(step, out);
    }
}

/// Reusable keystream cursor for a [`NoiseStream`].
#[derive(Debug, Clone)]
pub struct NormalReader {
    rng: ChaCha8Rng,
}

impl NormalReader {
    pub fn fill(&mut self, step: u64, out: &mut [f64]) {
        assert!(out.len() <= MAX_MODES, "at most {MAX_MODES} modes are addressable");
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
        for z in out.iter_mut() {
            *z = StandardNormal.sample(&mut self.rng);
        }
    }
}

/// `√(τ q_j)` per retained mode.
pub fn increment_scales(spec: &NoiseSpec, dim: usize, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(invalid(format!("stepsize must be positive, got {tau}")));
    }
    Ok(spec.coefficients(dim)?.into_iter().map(|q| (tau * q).sqrt()).collect())
}

/// `P_N ΔW` over fine step `fine_step`, variance `τ_fine q_j` per mode.
pub fn sample_increment(
    stream: &NoiseStream,
    spec: &NoiseSpec,
    dim: usize,
    fine_step: u64,
    tau_fine: f64,
) -> Result<ModalState> {
    let scales = increment_scales(spec, dim, tau_fine)?;
    let mut z = vec![0.0; dim];
    stream.standard_normals(fine_step, &mut z);
    z.iter_mut().zip(&scales).for_each(|(z, s)| *z *= s);
    Ok(ModalState::new(z))
}

/// Sum of the `ratio` fine increments making up coarse step `coarse_step`.
pub fn aggregate_increment(
    stream: &NoiseStream,
    spec: &NoiseSpec,
    dim: usize,
    coarse_step: u64,
    ratio: u64,
    tau_fine: f64,
) -> Result<ModalState> {
    if ratio == 0 {
        return Err(invalid("aggregation ratio must be at least 1"));
    }
    if stream.fine_steps % ratio != 0 {
        return Err(invalid(format!(
            "coarse grid with ratio {ratio} is not aligned to {} fine steps",
            stream.fine_steps
        )));
    }
    if coarse_step >= stream.fine_steps / ratio {
        return Err(invalid(format!(
            "coarse step {coarse_step} beyond the horizon of {} coarse steps",
            stream.fine_steps / ratio
        )));
    }
    let scales = increment_scales(spec, dim, tau_fine)?;
    let mut reader = stream.reader();
    let mut acc = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    accumulate_increments(&mut reader, &scales, coarse_step * ratio, ratio, &mut z, &mut acc);
    Ok(ModalState::new(acc))
}

/// `acc = Σ_{s=first}^{first+count−1} scales ⊙ z(s)`, summed in step order.
pub(crate) fn accumulate_increments(
    reader: &mut NormalReader,
    scales: &[f64],
    first: u64,
    count: u64,
    scratch: &mut [f64],
    acc: &mut [f64],
) {
    for (k, step) in (first..first + count).enumerate() {
        reader.fill(step, scratch);
        if k == 0 {
            acc.iter_mut()
                .zip(scratch.iter().zip(scales))
                .for_each(|(a, (z, s))| *a = z * s);
        } else {
            acc.iter_mut()
                .zip(scratch.iter().zip(scales))
                .for_each(|(a, (z, s))| *a += z * s);
        }
    }
}
