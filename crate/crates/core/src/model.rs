//! Polynomial drift, its tamed modification, and structural-constant checks.
//!
//! The tamed drift is
//!
//! ```text
//! f_{τ,N}(u) = f(u) / (1 + (β₁τ^θ + β₂λ_N^{-ρ}) |u|^{(2q-2)/α})^α
//! ```
//!
//! with `α = 0` meaning no taming at all.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result, Violation};
use crate::spectral::{eigenvalue, ModalState, SpectralBasis};

/// Largest admissible degree parameter in one space dimension: `q < (4+3d)/(2d) = 3.5`.
pub const MAX_Q: u32 = 3;

/// Drift `f(u) = Σ a_k u^k` of degree `2q − 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialDrift {
    coefficients: Vec<f64>,
    q: u32,
}

impl PolynomialDrift {
    /// Validated drift: `2q` coefficients `a_0..a_{2q-1}`, negative leading
    /// coefficient, `q ∈ {1, 2, 3}`.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        let len = coefficients.len();
        if len == 0 || len % 2 != 0 {
            return Err(invalid(format!(
                "drift needs an even number 2q of coefficients (odd degree), got {len}"
            )));
        }
        let q = (len / 2) as u32;
        if q > MAX_Q {
            return Err(invalid(format!("q = {q} exceeds the admissible range 1..={MAX_Q}")));
        }
        if coefficients.iter().any(|a| !a.is_finite()) {
            return Err(invalid("drift coefficients must be finite"));
        }
        let lead = coefficients[len - 1];
        if !(lead < 0.0) {
            return Err(invalid(format!(
                "leading coefficient a_{} = {lead} must be negative",
                len - 1
            )));
        }
        Ok(Self { coefficients, q })
    }

    /// `f(u) = σu − u³`.
    pub fn allen_cahn(sigma: f64) -> Self {
        Self {
            coefficients: vec![0.0, sigma, 0.0, -1.0],
            q: 2,
        }
    }

    /// Drift without the dissipativity checks of [`PolynomialDrift::new`].
    /// Used for diagnostics such as zero or linear growing drifts.
    pub fn unchecked(coefficients: Vec<f64>, q: u32) -> Self {
        Self { coefficients, q }
    }

    /// `f ≡ 0`, treated as `q = 1`.
    pub fn zero() -> Self {
        Self::unchecked(vec![0.0, 0.0], 1)
    }

    /// `f(u) = σu`, treated as `q = 1`.
    pub fn linear(sigma: f64) -> Self {
        Self::unchecked(vec![0.0, sigma], 1)
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn leading_coefficient(&self) -> f64 {
        *self.coefficients.last().unwrap_or(&0.0)
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        horner(&self.coefficients, u)
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let d: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, a)| k as f64 * a)
            .collect();
        horner(&d, u)
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        let d: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, a)| (k * (k - 1)) as f64 * a)
            .collect();
        horner(&d, u)
    }
}

#[inline]
fn horner(coefficients: &[f64], u: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &a| acc * u + a)
}

/// Polynomial evaluation of the drift.
pub fn eval_f(u: f64, drift: &PolynomialDrift) -> f64 {
    drift.eval(u)
}

/// Structural constants of the drift (one-sided Lipschitz, growth, coercivity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    /// `L_f`: `f'(u) ≤ L_f`.
    pub lipschitz: f64,
    /// `R_f`: `|f'(u)| ∨ |f''(u)| ≤ R_f (1 + |u|^{2q-2})`.
    pub growth: f64,
}

impl DriftConstants {
    /// Constants for `σu − u³` with `c_0 = 0.9`, `c_3 = 1.5`, `L_f = σ`.
    ///
    /// `c_1` and `c_2` come from Young's inequality on the leftover `0.1 u⁴`:
    /// `|u³v| ≤ 0.05u⁴ + 843.75v⁴` and `(3|σ|/2)u² − 0.05u⁴ ≤ 11.25σ²`.
    pub fn allen_cahn(sigma: f64) -> Self {
        Self {
            c0: 0.9,
            c1: 845.0,
            c2: 11.5 * sigma * sigma + 1.0,
            c3: 1.5,
            c4: sigma.abs().max(1.0),
            c5: 0.0,
            lipschitz: sigma,
            growth: sigma.abs().max(3.0),
        }
    }

    fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        for (name, c) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2), ("c3", self.c3), ("c4", self.c4)] {
            if !(c > 0.0) || !c.is_finite() {
                v.push(Violation::new("drift-constants", format!("{name} = {c} must be positive")));
            }
        }
        if !(self.c5 >= 0.0) {
            v.push(Violation::new("drift-constants", format!("c5 = {} must be nonnegative", self.c5)));
        }
        if !self.lipschitz.is_finite() || !(self.growth > 0.0) {
            v.push(Violation::new("drift-constants", "L_f must be finite and R_f positive"));
        }
        v
    }
}

/// Taming exponents and weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TamingParams {
    pub alpha: f64,
    pub theta: f64,
    pub rho: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Stepsize ceiling `τ*`.
    pub tau_max: f64,
}

impl Default for TamingParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            theta: 1.0,
            rho: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            tau_max: 1.0,
        }
    }
}

/// Exponent constraint `αρ < 1 − d/4` in one dimension.
pub const ALPHA_RHO_BOUND: f64 = 0.75;

impl TamingParams {
    pub fn untamed() -> Self {
        Self {
            alpha: 0.0,
            ..Self::default()
        }
    }

    /// Violations of the taming structure for a drift of degree parameter `q`.
    pub fn violations(&self, q: u32) -> Vec<Violation> {
        let mut v = Vec::new();
        let tag = "taming-exponents";
        if !(0.0..=1.0).contains(&self.alpha) {
            v.push(Violation::new(tag, format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        for (name, x) in [
            ("theta", self.theta),
            ("rho", self.rho),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("tau_max", self.tau_max),
        ] {
            if !(x > 0.0) || !x.is_finite() {
                v.push(Violation::new(tag, format!("{name} = {x} must be positive")));
            }
        }
        if !(self.alpha * self.rho < ALPHA_RHO_BOUND) {
            v.push(Violation::new(
                tag,
                format!(
                    "alpha*rho = {} must be < {ALPHA_RHO_BOUND}",
                    self.alpha * self.rho
                ),
            ));
        }
        if q == 1 && self.alpha != 0.0 {
            v.push(Violation::new(tag, "q = 1 requires alpha = 0"));
        }
        if q > 1 && self.alpha == 0.0 {
            v.push(Violation::new(tag, format!("q = {q} requires alpha in (0, 1]")));
        }
        v
    }
}

/// Drift, constants and taming bound to the spectral cutoff `λ_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TamedNonlinearity {
    pub drift: PolynomialDrift,
    pub constants: DriftConstants,
    pub taming: TamingParams,
    pub lambda_n: f64,
}

impl TamedNonlinearity {
    /// Validated construction; every structural violation is reported.
    pub fn new(
        drift: PolynomialDrift,
        constants: DriftConstants,
        taming: TamingParams,
        lambda_n: f64,
    ) -> Result<Self> {
        let mut violations = constants.violations();
        violations.extend(taming.violations(drift.q()));
        if !(drift.leading_coefficient() < 0.0) {
            violations.push(Violation::new(
                "drift-leading",
                "leading drift coefficient must be negative",
            ));
        }
        if !(lambda_n > 0.0) {
            violations.push(Violation::new("spectrum", "lambda_N must be positive"));
        }
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        Ok(Self::new_unchecked(drift, constants, taming, lambda_n))
    }

    /// Construction without structural checks, for stress tests and
    /// diagnostic drifts.
    pub fn new_unchecked(
        drift: PolynomialDrift,
        constants: DriftConstants,
        taming: TamingParams,
        lambda_n: f64,
    ) -> Self {
        Self {
            drift,
            constants,
            taming,
            lambda_n,
        }
    }

    /// Untamed zero drift on a basis of top eigenvalue `lambda_n`.
    pub fn zero_drift(lambda_n: f64) -> Self {
        Self::new_unchecked(
            PolynomialDrift::zero(),
            DriftConstants::allen_cahn(0.0),
            TamingParams::untamed(),
            lambda_n,
        )
    }

    /// `β₁τ^θ + β₂λ_N^{-ρ}`.
    pub fn taming_scale(&self, tau: f64) -> f64 {
        let t = &self.taming;
        t.beta1 * tau.powf(t.theta) + t.beta2 * self.lambda_n.powf(-t.rho)
    }

    pub fn is_untamed(&self) -> bool {
        self.taming.alpha == 0.0
    }

    /// Pointwise evaluator for a fixed stepsize.
    pub fn kernel(&self, tau: f64) -> TamingKernel {
        let alpha = self.taming.alpha;
        if alpha == 0.0 {
            return TamingKernel {
                coefficients: self.drift.coefficients.clone(),
                scale: 0.0,
                power: Power::Int(0),
                root: Root::Untamed,
            };
        }
        let exponent = (2.0 * self.drift.q as f64 - 2.0) / alpha;
        let power = if (exponent - exponent.round()).abs() < 1e-12 && exponent <= 64.0 {
            Power::Int(exponent.round() as i32)
        } else {
            Power::Real(exponent)
        };
        let root = if alpha == 1.0 {
            Root::One
        } else if alpha == 0.5 {
            Root::Half
        } else if alpha == 0.25 {
            Root::Quarter
        } else {
            Root::Real(alpha)
        };
        TamingKernel {
            coefficients: self.drift.coefficients.clone(),
            scale: self.taming_scale(tau),
            power,
            root,
        }
    }

    /// `f_{τ,N}(u)`.
    pub fn eval(&self, u: f64, tau: f64) -> Result<f64> {
        eval_f_tamed(u, tau, self)
    }

    /// Whether `L_f < λ_1` (pathwise contraction of the drift-perturbed semigroup).
    pub fn is_contractive(&self) -> bool {
        self.constants.lipschitz < eigenvalue(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Power {
    Int(i32),
    Real(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Root {
    Untamed,
    One,
    Half,
    Quarter,
    Real(f64),
}

/// Precomputed tamed-drift evaluator at a fixed stepsize.
#[derive(Debug, Clone, PartialEq)]
pub struct TamingKernel {
    coefficients: Vec<f64>,
    scale: f64,
    power: Power,
    root: Root,
}

const LANES: usize = 8;

/// `x^k` by binary exponentiation, `k ≥ 0`.
#[inline]
fn int_pow(x: f64, k: u32) -> f64 {
    let (mut acc, mut base, mut k) = (1.0, x, k);
    while k > 0 {
        if k & 1 == 1 {
            acc *= base;
        }
        base *= base;
        k >>= 1;
    }
    acc
}

impl TamingKernel {
    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        let f = horner(&self.coefficients, u);
        let x = match self.power {
            Power::Int(k) => int_pow(u.abs(), k as u32),
            Power::Real(e) => u.abs().powf(e),
        };
        let base = 1.0 + self.scale * x;
        let denom = match self.root {
            Root::Untamed => return f,
            Root::One => base,
            Root::Half => base.sqrt(),
            Root::Quarter => base.sqrt().sqrt(),
            Root::Real(a) => base.powf(a),
        };
        if denom.is_finite() {
            f / denom
        } else {
            f / self.overflow_denominator(u)
        }
    }

    /// `(1 + s|u|^e)^α` through logarithms, for `|u|^e` beyond the float range.
    #[cold]
    fn overflow_denominator(&self, u: f64) -> f64 {
        let alpha = match self.root {
            Root::Untamed => return 1.0,
            Root::One => 1.0,
            Root::Half => 0.5,
            Root::Quarter => 0.25,
            Root::Real(a) => a,
        };
        let e = match self.power {
            Power::Int(k) => k as f64,
            Power::Real(e) => e,
        };
        (alpha * (self.scale.ln() + e * u.abs().ln())).exp()
    }

    /// In-place pointwise application; lane-wise, bit-identical to [`apply`](Self::apply).
    pub fn apply_slice(&self, values: &mut [f64]) {
        for chunk in values.chunks_mut(LANES) {
            let n = chunk.len();
            let mut u = [0.0; LANES];
            u[..n].copy_from_slice(chunk);
            let mut f = [0.0; LANES];
            for &a in self.coefficients.iter().rev() {
                for k in 0..LANES {
                    f[k] = f[k] * u[k] + a;
                }
            }
            if self.root == Root::Untamed {
                chunk.copy_from_slice(&f[..n]);
                continue;
            }
            let mut x = [1.0; LANES];
            match self.power {
                Power::Int(p) => {
                    let mut base = u.map(f64::abs);
                    let mut p = p as u32;
                    while p > 0 {
                        if p & 1 == 1 {
                            for k in 0..LANES {
                                x[k] *= base[k];
                            }
                        }
                        for b in base.iter_mut() {
                            *b *= *b;
                        }
                        p >>= 1;
                    }
                }
                Power::Real(e) => {
                    for k in 0..LANES {
                        x[k] = u[k].abs().powf(e);
                    }
                }
            }
            let mut d = x.map(|x| 1.0 + self.scale * x);
            match self.root {
                Root::Untamed | Root::One => {}
                Root::Half => d = d.map(f64::sqrt),
                Root::Quarter => d = d.map(|v| v.sqrt().sqrt()),
                Root::Real(a) => d = d.map(|v| v.powf(a)),
            }
            for k in 0..n {
                chunk[k] = if d[k].is_finite() {
                    f[k] / d[k]
                } else {
                    f[k] / self.overflow_denominator(u[k])
                };
            }
        }
    }
}

/// The tamed drift at stepsize `tau`.
pub fn eval_f_tamed(u: f64, tau: f64, tamed: &TamedNonlinearity) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(invalid(format!("stepsize must be positive, got {tau}")));
    }
    Ok(tamed.kernel(tau).apply(u))
}

/// `P_N F_{τ,N}(X)`: synthesize on the grid, tame pointwise, project back.
pub fn apply_tamed_nemytskii(
    state: &ModalState,
    tau: f64,
    tamed: &TamedNonlinearity,
    basis: &SpectralBasis,
) -> Result<ModalState> {
    if !(tau > 0.0) {
        return Err(invalid(format!("stepsize must be positive, got {tau}")));
    }
    let degree = 2 * tamed.drift.q() as usize - 1;
    if basis.grid_size() < degree * basis.dim() {
        return Err(invalid(format!(
            "grid size K={} below (2q-1)N={} aliases the drift projection",
            basis.grid_size(),
            degree * basis.dim()
        )));
    }
    if state.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: state.len(),
        });
    }
    let mut grid = vec![0.0; basis.grid_size()];
    basis.synthesize_into(state.coefficients(), &mut grid);
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::BlowUp { step: 0, time: 0.0 });
    }
    tamed.kernel(tau).apply_slice(&mut grid);
    let mut out = vec![0.0; basis.dim()];
    basis.analyze_into(&grid, &mut out);
    Ok(ModalState::new(out))
}

/// Outcome of the stepsize admissibility condition
/// `2(c_3 + 1_{q=1} c_4)² τ^{1−θα} ≤ c_0 β₁^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Admissibility {
    pub tau: f64,
    pub tau_crit: f64,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; negative when the condition fails.
    pub margin: f64,
    pub passed: bool,
}

pub fn check_admissibility(tau: f64, tamed: &TamedNonlinearity) -> Result<Admissibility> {
    if !(tau > 0.0) {
        return Err(invalid(format!("stepsize must be positive, got {tau}")));
    }
    let t = &tamed.taming;
    let c = &tamed.constants;
    let exponent = 1.0 - t.theta * t.alpha;
    if !(exponent > 0.0) {
        return Err(invalid(format!(
            "theta*alpha = {} >= 1 makes the admissibility condition degenerate",
            t.theta * t.alpha
        )));
    }
    let growth = c.c3 + if tamed.drift.q() == 1 { c.c4 } else { 0.0 };
    let factor = 2.0 * growth * growth;
    let rhs = c.c0 * t.beta1.powf(t.alpha);
    let lhs = factor * tau.powf(exponent);
    let tau_crit = (rhs / factor).powf(1.0 / exponent);
    Ok(Admissibility {
        tau,
        tau_crit,
        lhs,
        rhs,
        margin: rhs - lhs,
        passed: lhs <= rhs,
    })
}

/// Sampling sweep over `(u, v) ∈ [−R, R]²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub range: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for Sweep {
    fn default() -> Self {
        Self {
            range: 50.0,
            samples: 10_000,
            seed: 0x5eed,
        }
    }
}

impl Sweep {
    /// Random pairs plus the corners and axes of the square.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let r = self.range;
        let mut pts = vec![
            (0.0, 0.0),
            (r, 0.0),
            (-r, 0.0),
            (0.0, r),
            (0.0, -r),
            (r, r),
            (r, -r),
            (-r, r),
            (-r, -r),
            (1.0, 0.0),
            (-1.0, 0.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        pts.extend((0..self.samples).map(|_| (rng.random_range(-r..=r), rng.random_range(-r..=r))));
        pts
    }
}

/// Worst case of one inequality over a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    /// `min(rhs − lhs)` over the sweep.
    pub worst_margin: f64,
    pub witness: (f64, f64),
    pub passed: bool,
}

struct Tracker {
    name: &'static str,
    worst: f64,
    witness: (f64, f64),
    failed: bool,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            worst: f64::INFINITY,
            witness: (f64::NAN, f64::NAN),
            failed: false,
        }
    }

    /// Records `lhs ≤ rhs` up to rounding relative to the magnitudes involved.
    fn record(&mut self, lhs: f64, rhs: f64, at: (f64, f64), rel_tol: f64) {
        let margin = rhs - lhs;
        let slack = rel_tol * (lhs.abs() + rhs.abs() + 1.0);
        if margin < self.worst || (margin.is_nan() && !self.failed) {
            self.worst = margin;
            self.witness = at;
        }
        if !(margin >= -slack) {
            if !self.failed {
                self.witness = at;
            }
            self.failed = true;
        }
    }

    fn finish(self) -> InequalityCheck {
        InequalityCheck {
            name: self.name.to_string(),
            worst_margin: self.worst,
            witness: self.witness,
            passed: !self.failed,
        }
    }
}

const SWEEP_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub checks: Vec<InequalityCheck>,
    /// `L_f < λ_1`.
    pub contractive: bool,
    pub passed: bool,
}

/// Checks the drift inequalities of the structural assumptions on a sweep.
pub fn validate_drift_constants(
    drift: &PolynomialDrift,
    constants: &DriftConstants,
    sweep: &Sweep,
) -> Result<DriftReport> {
    if !(drift.leading_coefficient() < 0.0) {
        return Err(Error::Validation(vec![Violation::new(
            "drift-leading",
            format!(
                "leading coefficient {} must be negative",
                drift.leading_coefficient()
            ),
        )]));
    }
    if sweep.samples < 1000 {
        return Err(invalid(format!(
            "sweep needs at least 1000 samples, got {}",
            sweep.samples
        )));
    }
    let violations = constants.violations();
    if !violations.is_empty() {
        return Err(Error::Validation(violations));
    }
    let c = constants;
    let q = drift.q() as i32;
    let mut one_sided = Tracker::new("f'(u) <= L_f");
    let mut growth = Tracker::new("|f'(u)| v |f''(u)| <= R_f(1+|u|^(2q-2))");
    let mut coercive = Tracker::new("(u+v)f(u) <= -c0|u|^2q + c1|v|^2q + c2");
    let mut local_lip = Tracker::new("|f(u)-f(v)| <= (c3(|u|^(2q-2)+|v|^(2q-2)) + c4)|u-v|");
    let mut bound = Tracker::new("|f(u)| <= c3|u|^(2q-1) + c4|u| + c5");

    for (u, v) in sweep.points() {
        let (fu, fv) = (drift.eval(u), drift.eval(v));
        let (au, av) = (u.abs(), v.abs());
        one_sided.record(drift.derivative(u), c.lipschitz, (u, v), SWEEP_REL_TOL);
        growth.record(
            drift.derivative(u).abs().max(drift.second_derivative(u).abs()),
            c.growth * (1.0 + au.powi(2 * q - 2)),
            (u, v),
            SWEEP_REL_TOL,
        );
        coercive.record(
            (u + v) * fu,
            -c.c0 * au.powi(2 * q) + c.c1 * av.powi(2 * q) + c.c2,
            (u, v),
            SWEEP_REL_TOL,
        );
        local_lip.record(
            (fu - fv).abs(),
            (c.c3 * (au.powi(2 * q - 2) + av.powi(2 * q - 2)) + c.c4) * (u - v).abs(),
            (u, v),
            SWEEP_REL_TOL,
        );
        bound.record(
            fu.abs(),
            c.c3 * au.powi(2 * q - 1) + c.c4 * au + c.c5,
            (u, v),
            SWEEP_REL_TOL,
        );
    }
    let checks: Vec<_> = [one_sided, growth, coercive, local_lip, bound]
        .into_iter()
        .map(Tracker::finish)
        .collect();
    let passed = checks.iter().all(|c| c.passed);
    Ok(DriftReport {
        checks,
        contractive: c.lipschitz < eigenvalue(1),
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TamingReport {
    pub tau: f64,
    pub checks: Vec<InequalityCheck>,
    /// Coercivity constant `c̃_0` used in the dissipativity check.
    pub c0_tilde: f64,
    /// Explicit `c̃_1` assembled from the drift constants.
    pub c1_tilde: f64,
    /// Smallest `c̃_1` consistent with the sweep at the given `c̃_0`.
    pub c1_tilde_fitted: f64,
    pub passed: bool,
}

/// `sup_{u ≥ 0} [(c_3u^{2q−1} + c_4u + c_5)² − 2^α c_3² u^{4q−2}]` on a fine grid.
fn young_remainder(c: &DriftConstants, q: i32, alpha: f64, range: f64) -> f64 {
    let lead = 2f64.powf(alpha) * c.c3 * c.c3;
    let n = 200_000;
    // The bracket is eventually decreasing; scan well past the sweep range.
    let top = range.max(10.0) * 4.0;
    (0..=n)
        .map(|i| {
            let u = top * i as f64 / n as f64;
            let g = c.c3 * u.powi(2 * q - 1) + c.c4 * u + c.c5;
            g * g - lead * u.powi(4 * q - 2)
        })
        .fold(0.0, f64::max)
        * (1.0 + 1e-9)
}

/// Checks the four taming inequalities on a sweep at stepsize `tau`:
/// dissipativity of the tamed drift, `|f_{τ,N}| ≤ |f|`, the linear growth
/// bound with constant `λ_N^{αρ}`, and the taming defect bound.
pub fn check_taming_inequalities(
    tau: f64,
    tamed: &TamedNonlinearity,
    sweep: &Sweep,
) -> Result<TamingReport> {
    let adm = check_admissibility(tau, tamed)?;
    if !adm.passed {
        return Err(Error::Validation(vec![Violation::new(
            "admissibility",
            format!("tau={tau} > tau_crit={:.6}", adm.tau_crit),
        )]));
    }
    let c = &tamed.constants;
    let t = &tamed.taming;
    let q = tamed.drift.q() as i32;
    let alpha = t.alpha;
    let kernel = tamed.kernel(tau);
    let scale = tamed.taming_scale(tau);

    let (c0_tilde, c1_tilde) = if alpha == 0.0 {
        (c.c0 / 2.0, c.c1.max(c.c2 + c.c5 * c.c5))
    } else {
        let denom = (1.0
            + t.beta1 * t.tau_max.max(tau).powf(t.theta)
            + t.beta2 * eigenvalue(1).powf(-t.rho))
        .powf(2.0 * alpha);
        let c0_tilde = 2f64.powf(alpha) * c.c0 / (4.0 * denom);
        let remainder = young_remainder(c, q, alpha, sweep.range);
        (c0_tilde, c.c1.max(c.c2 + remainder / 2.0 + c0_tilde))
    };

    let mut dissipative = Tracker::new("2(u+v)f_tau(u) + tau|f_tau(u)|^2 <= -2c0~|u|^2 + 2c1~(1+|v|^2q)");
    let mut dominated = Tracker::new("|f_tau(u)| <= |f(u)|");
    let mut linear = Tracker::new("|f_tau(u)| <= 2^(1-a)b2^-a c3 lN^(a rho)|u| + 2^(1-a)(c4|u|+c5)");
    let mut defect = Tracker::new("|f_tau(u)-f(u)| <= a s |u|^((2q-2)/a) |f(u)|");
    let mut fitted = 0.0f64;

    for (u, v) in sweep.points() {
        let f = tamed.drift.eval(u);
        let ft = kernel.apply(u);
        let au = u.abs();
        let lhs = 2.0 * (u + v) * ft + tau * ft * ft;
        let weight = 2.0 * (1.0 + v.abs().powi(2 * q));
        dissipative.record(lhs, -2.0 * c0_tilde * u * u + c1_tilde * weight, (u, v), SWEEP_REL_TOL);
        fitted = fitted.max((lhs + 2.0 * c0_tilde * u * u) / weight);

        dominated.record(ft.abs(), f.abs(), (u, v), 0.0);

        if alpha == 0.0 {
            linear.record(ft.abs(), f.abs(), (u, v), 0.0);
            defect.record((ft - f).abs(), 0.0, (u, v), 0.0);
        } else {
            let k = 2f64.powf(1.0 - alpha);
            let bound = k * t.beta2.powf(-alpha) * c.c3 * tamed.lambda_n.powf(alpha * t.rho) * au
                + k * (c.c4 * au + c.c5);
            linear.record(ft.abs(), bound, (u, v), SWEEP_REL_TOL);
            let x = au.powf((2.0 * q as f64 - 2.0) / alpha);
            defect.record((ft - f).abs(), alpha * scale * x * f.abs(), (u, v), SWEEP_REL_TOL);
        }
    }
    let checks: Vec<_> = [dissipative, dominated, linear, defect]
        .into_iter()
        .map(Tracker::finish)
        .collect();
    let passed = checks.iter().all(|c| c.passed) && fitted.is_finite();
    Ok(TamingReport {
        tau,
        checks,
        c0_tilde,
        c1_tilde,
        c1_tilde_fitted: fitted.max(0.0),
        passed,
    })
}

/// Binomial-type inequality used for the moment recursion:
///
/// ```text
/// (A + τB)^{2q−1} ≤ e^{(2q−2)υτ} A^{2q−1}
///                 + τ (τ^{2q−2} + (1 + (2/υ)^{2q−1}) e^{(2q−2)τ}) B^{2q−1}
/// ```
pub fn check_binomial_lemma(a: f64, b: f64, tau: f64, q: u32, upsilon: f64) -> bool {
    let k = 2 * q as i32 - 1;
    let m = 2.0 * q as f64 - 2.0;
    let lhs = (a + tau * b).powi(k);
    let rhs = (m * upsilon * tau).exp() * a.powi(k)
        + tau
            * (tau.powi(k - 1) + (1.0 + (2.0 / upsilon).powi(k)) * (m * tau).exp())
            * b.powi(k);
    lhs <= rhs
}
