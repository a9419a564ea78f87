//! Transfer of control profiles from `P` to a monotone function `f(P)`, the
//! spectral split behind that transfer, and the fractional propagation and
//! Carleman-type growth experiments on the circle.
//!
//! For `f(s) = s^α` and `λ̃ = λ^{1/α}` a profile `(M, m)` for `P` yields
//!
//! ```text
//! M_α(λ) = M(λ̃) λ^{1/α-1} + m(λ̃) λ^{1+(-2+2(2γ+1-α)_+)/α},   m_α(λ) = m(λ̃)
//! ```
//!
//! for `P^α` with weights `Λ_α^{(μ-γ)/α}` and `QΛ_α^{μ/α}`, whenever `α ≥ 2γ`.

use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::control::{
    calibrate_upper_bound, control_constant, control_profile, scaled_observability_constant,
    schrodinger_observability_constant, CalibratedComparison, ControlProfile,
};
use crate::damping::{indicator_observation, DampingFunctionSpec, ObservationOperator};
use crate::error::{ensure, LabError, Result};
use crate::linalg::{c, CVector};
use crate::regression::{fit_line, LineFit};
use crate::resolvent::{fit_exponent, ExponentFit};
use crate::spectral::SpectralModel;

pub const DEFAULT_RHO0: f64 = 2.0;
/// Relative gap below which dilated and source constants count as equal.
pub const LOSSLESS_TOL: f64 = 1e-10;
/// Largest `|slope|` of a log-log constant profile that still counts as flat.
pub const FLATNESS_TOL: f64 = 0.1;
/// Smallest `R²` accepted for exponential growth in `λ^{1/α}`.
pub const CARLEMAN_R2: f64 = 0.95;
/// Fraction of the free arc left empty on each side of the cutoff.
const CUTOFF_MARGIN: f64 = 0.1;
/// Relative slack when locating `λ̃` inside the source grid.
const GRID_TOL: f64 = 1e-12;
/// Samples used to audit the growth hypothesis on `f`.
const HYPOTHESIS_SAMPLES: usize = 400;
const INVERSE_TOL: f64 = 1e-9;

/// `max(x, 0)`.
fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

/// Exponent of `λ` in the observation-weight term of the dilated pencil weight.
pub fn observation_term_exponent(alpha: f64, gamma: f64) -> f64 {
    1.0 + (-2.0 + 2.0 * positive_part(2.0 * gamma + 1.0 - alpha)) / alpha
}

/// Exponent of `λ` multiplying `M(λ̃)` in the dilated pencil weight.
pub fn pencil_term_exponent(alpha: f64) -> f64 {
    1.0 / alpha - 1.0
}

fn check_alpha(alpha: f64, gamma: f64) -> Result<()> {
    ensure(alpha > 0.0 && alpha.is_finite(), || format!("α must be positive, got {alpha}"))?;
    if alpha < 2.0 * gamma {
        return Err(LabError::HypothesisViolation(format!("α = {alpha} is below 2γ = {}", 2.0 * gamma)));
    }
    Ok(())
}

/// Piecewise linear interpolation of `log values` in `log grid`.
fn log_log_interpolate(grid: &[f64], values: &[f64], at: f64) -> Result<f64> {
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !(at >= lo * (1.0 - GRID_TOL) && at <= hi * (1.0 + GRID_TOL)) {
        return Err(LabError::InvalidArgument(format!("λ̃ = {at} lies outside the source grid [{lo}, {hi}]")));
    }
    let at = at.clamp(lo, hi);
    let k = grid.partition_point(|g| *g < at);
    if k < grid.len() && grid[k] == at {
        return Ok(values[k]);
    }
    let (k0, k1) = (k - 1, k);
    let t = (at / grid[k0]).ln() / (grid[k1] / grid[k0]).ln();
    Ok((values[k0].ln() * (1.0 - t) + values[k1].ln() * t).exp())
}

#[derive(Debug, Clone, Serialize)]
pub struct DilationPrediction {
    pub alpha: f64,
    pub source_profile: ControlProfile,
    pub target_grid: Vec<f64>,
    pub tilde_lambda: Vec<f64>,
    pub predicted_pencil_weight: Vec<f64>,
    pub predicted_observation_weight: Vec<f64>,
}

impl DilationPrediction {
    /// Quadratic-form bound `(M_α² + m_α²)^{1/2}`, the sharpest one the sum
    /// form implies.
    pub fn implied_constants(&self) -> Vec<f64> {
        self.predicted_pencil_weight
            .iter()
            .zip(&self.predicted_observation_weight)
            .map(|(big, small)| big.hypot(*small))
            .collect()
    }
}

fn source_weights(profile: &ControlProfile, tilde: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    tilde
        .iter()
        .map(|&t| {
            Ok((
                log_log_interpolate(&profile.lambda_grid, &profile.pencil_weight, t)?,
                log_log_interpolate(&profile.lambda_grid, &profile.observation_weight, t)?,
            ))
        })
        .collect::<Result<Vec<_>>>()
        .map(|pairs| pairs.into_iter().unzip())
}

fn check_target(target_grid: &[f64]) -> Result<()> {
    ensure(!target_grid.is_empty(), || "empty target grid".into())?;
    ensure(target_grid.iter().all(|l| *l > 0.0 && l.is_finite()), || "target grid must be positive".into())
}

/// Profile for `P^α` predicted from a profile for `P`.
pub fn dilate_profile(profile: &ControlProfile, alpha: f64, target_grid: &[f64]) -> Result<DilationPrediction> {
    check_alpha(alpha, profile.gamma)?;
    check_target(target_grid)?;
    let tilde: Vec<f64> = target_grid.iter().map(|l| l.powf(1.0 / alpha)).collect();
    let (big, small) = source_weights(profile, &tilde)?;
    let (pe, oe) = (pencil_term_exponent(alpha), observation_term_exponent(alpha, profile.gamma));
    let predicted_pencil_weight = target_grid
        .iter()
        .zip(big.iter().zip(&small))
        .map(|(l, (bm, sm))| bm * l.powf(pe) + sm * l.powf(oe))
        .collect();
    Ok(DilationPrediction {
        alpha,
        source_profile: profile.clone(),
        target_grid: target_grid.to_vec(),
        tilde_lambda: tilde,
        predicted_pencil_weight,
        predicted_observation_weight: small,
    })
}

type ScalarMap = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A monotone calculus function `f` with `f' ≥ K^{-1} s^{α-1}` for `s ≥ ρ₀²`.
pub struct CalculusFunction {
    name: String,
    forward: ScalarMap,
    inverse: ScalarMap,
    pub growth_constant: f64,
    pub alpha: f64,
    pub rho0: f64,
}

impl fmt::Debug for CalculusFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CalculusFunction")
            .field("name", &self.name)
            .field("growth_constant", &self.growth_constant)
            .field("alpha", &self.alpha)
            .field("rho0", &self.rho0)
            .finish()
    }
}

impl CalculusFunction {
    pub fn new(
        name: impl Into<String>,
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        growth_constant: f64,
        alpha: f64,
        rho0: f64,
    ) -> Result<Self> {
        ensure(growth_constant > 0.0 && growth_constant.is_finite(), || {
            format!("growth constant must be positive, got {growth_constant}")
        })?;
        ensure(alpha > 0.0 && alpha.is_finite(), || format!("α must be positive, got {alpha}"))?;
        ensure(rho0 > 0.0 && rho0.is_finite(), || format!("ρ₀ must be positive, got {rho0}"))?;
        Ok(Self { name: name.into(), forward: Box::new(forward), inverse: Box::new(inverse), growth_constant, alpha, rho0 })
    }

    /// Inverse by bisection; `forward` must be increasing and unbounded.
    pub fn with_bisection_inverse(
        name: impl Into<String>,
        forward: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static,
        growth_constant: f64,
        alpha: f64,
        rho0: f64,
    ) -> Result<Self> {
        let f = forward.clone();
        Self::new(name, forward, move |y| bisect_inverse(&f, y), growth_constant, alpha, rho0)
    }

    /// `s ↦ s^α`, with `K = 1/α` and any `ρ₀`.
    pub fn power(alpha: f64) -> Result<Self> {
        ensure(alpha > 0.0, || format!("α must be positive, got {alpha}"))?;
        Self::new(format!("s^{alpha}"), move |s: f64| s.powf(alpha), move |y: f64| y.powf(1.0 / alpha), 1.0 / alpha, alpha, 1.0)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.forward)(s)
    }

    pub fn invert(&self, y: f64) -> f64 {
        (self.inverse)(y)
    }

    /// `(f^{-1}(λ²))^{1/2}`.
    pub fn tilde_lambda(&self, lambda: f64) -> f64 {
        self.invert(lambda * lambda).max(0.0).sqrt()
    }

    /// Audits monotonicity, the inverse, and the difference form of the growth
    /// bound `|f(t) - f(s)| ≥ K^{-1} min(s, t)^{α-1} |t - s|` on `[ρ₀², s_max]`.
    pub fn check_hypotheses(&self, s_max: f64) -> Result<()> {
        let s_min = self.rho0 * self.rho0;
        ensure(s_max > s_min, || format!("audit range [{s_min}, {s_max}] is empty"))?;
        let ratio = (s_max / s_min).powf(1.0 / (HYPOTHESIS_SAMPLES - 1) as f64);
        let samples: Vec<f64> = (0..HYPOTHESIS_SAMPLES).map(|k| s_min * ratio.powi(k as i32)).collect();
        for pair in samples.windows(2) {
            let (s, t) = (pair[0], pair[1]);
            let (fs, ft) = (self.eval(s), self.eval(t));
            if !(fs.is_finite() && ft.is_finite() && ft > fs) {
                return Err(LabError::HypothesisViolation(format!("{} is not increasing on [{s}, {t}]", self.name)));
            }
            let needed = s.min(t).powf(self.alpha - 1.0).min(t.powf(self.alpha - 1.0)) * (t - s) / self.growth_constant;
            if ft - fs < needed * (1.0 - 1e-12) {
                return Err(LabError::HypothesisViolation(format!(
                    "{} grows by {} on [{s}, {t}], below the required {needed}",
                    self.name,
                    ft - fs
                )));
            }
            let back = self.invert(fs);
            if (back - s).abs() > INVERSE_TOL * s.max(1.0) {
                return Err(LabError::HypothesisViolation(format!(
                    "inverse of {} is inconsistent at s = {s}: got {back}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn bisect_inverse(f: &impl Fn(f64) -> f64, y: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0f64);
    while f(hi) < y && hi < 1e300 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Profile for `f(P)` with `λ̃ = (f^{-1}(λ²))^{1/2}`; reduces to
/// [`dilate_profile`] for `f(s) = s^α`.
pub fn dilate_general(
    profile: &ControlProfile,
    f: &CalculusFunction,
    target_grid: &[f64],
) -> Result<DilationPrediction> {
    check_alpha(f.alpha, profile.gamma)?;
    check_target(target_grid)?;
    let tilde: Vec<f64> = target_grid.iter().map(|l| f.tilde_lambda(*l)).collect();
    let top = tilde.iter().cloned().fold(0.0, f64::max);
    f.check_hypotheses((4.0 * top * top).max(4.0 * f.rho0 * f.rho0))?;
    let (big, small) = source_weights(profile, &tilde)?;
    let alpha = f.alpha;
    let observation_exponent = -2.0 + 2.0 * positive_part(2.0 * profile.gamma + 1.0 - alpha);
    let predicted_pencil_weight = target_grid
        .iter()
        .zip(&tilde)
        .zip(big.iter().zip(&small))
        .map(|((l, t), (bm, sm))| l * (bm * t.powf(1.0 - 2.0 * alpha) + sm * t.powf(observation_exponent)))
        .collect();
    Ok(DilationPrediction {
        alpha,
        source_profile: profile.clone(),
        target_grid: target_grid.to_vec(),
        tilde_lambda: tilde,
        predicted_pencil_weight,
        predicted_observation_weight: small,
    })
}

/// Mode indices of the four spectral regimes around `λ̃`, by base frequency.
#[derive(Debug, Clone, Serialize)]
pub struct RegimeDecomposition {
    pub rho0: f64,
    pub tilde_lambda: f64,
    /// `[0, ρ₀)`.
    pub low: Vec<usize>,
    /// `[ρ₀, λ̃/2)`.
    pub below: Vec<usize>,
    /// `[λ̃/2, 3λ̃/2]`.
    pub comparable: Vec<usize>,
    /// `(3λ̃/2, ∞)`.
    pub above: Vec<usize>,
}

impl RegimeDecomposition {
    pub fn counts(&self) -> [usize; 4] {
        [self.low.len(), self.below.len(), self.comparable.len(), self.above.len()]
    }
}

pub fn regime_masks(model: &SpectralModel, lambda: f64, alpha: f64, rho0: f64) -> Result<RegimeDecomposition> {
    ensure(alpha > 0.0 && lambda > 0.0, || format!("need λ, α > 0, got λ = {lambda}, α = {alpha}"))?;
    let tilde = lambda.powf(1.0 / alpha);
    ensure(rho0 >= 0.0 && rho0 < 0.5 * tilde, || format!("ρ₀ = {rho0} must lie below λ̃/2 = {}", 0.5 * tilde))?;
    let mut split = RegimeDecomposition {
        rho0,
        tilde_lambda: tilde,
        low: Vec::new(),
        below: Vec::new(),
        comparable: Vec::new(),
        above: Vec::new(),
    };
    for (k, rho) in model.base_frequencies().iter().enumerate() {
        let target = if *rho < rho0 {
            &mut split.low
        } else if *rho < 0.5 * tilde {
            &mut split.below
        } else if *rho <= 1.5 * tilde {
            &mut split.comparable
        } else {
            &mut split.above
        };
        target.push(k);
    }
    Ok(split)
}

/// Predicted against directly measured control constants for `P^α`.
#[derive(Debug, Clone, Serialize)]
pub struct DilationComparison {
    pub prediction: DilationPrediction,
    /// Measured `K_α(λ)` for `P^α` with weights `Λ_α^{(μ-γ)/α}`, `QΛ_α^{μ/α}`.
    pub measured: Vec<f64>,
    pub comparison: CalibratedComparison,
    /// The prediction dominates the measurement with calibration constant 1.
    pub uncalibrated_dominates: bool,
}

impl DilationComparison {
    pub fn passed(&self) -> bool {
        self.comparison.violations == 0
    }
}

/// Builds the source profile for `P` on `λ̃ = λ^{1/α}`, dilates it and
/// compares with control constants measured on `P^α`.
pub fn verify_dilation(
    model: &SpectralModel,
    q: &ObservationOperator,
    alpha: f64,
    mu: f64,
    gamma: f64,
    target_grid: &[f64],
) -> Result<DilationComparison> {
    check_alpha(alpha, gamma)?;
    check_target(target_grid)?;
    ensure(target_grid.windows(2).all(|w| w[0] < w[1]), || "target grid must be strictly ascending".into())?;
    let tilde: Vec<f64> = target_grid.iter().map(|l| l.powf(1.0 / alpha)).collect();
    let source = control_profile(model, q, &tilde, mu, gamma)?;
    let prediction = dilate_profile(&source, alpha, target_grid)?;
    let dilated = model.power(alpha)?;
    let measured = target_grid
        .par_iter()
        .map(|&l| Ok(control_constant(&dilated, q, l, mu / alpha, gamma / alpha)?.value))
        .collect::<Result<Vec<f64>>>()?;
    if let Some(i) = measured.iter().position(|k| !k.is_finite()) {
        return Err(LabError::HypothesisViolation(format!(
            "dilated control constant is infinite at λ = {}",
            target_grid[i]
        )));
    }
    let implied = prediction.implied_constants();
    let uncalibrated_dominates = implied.iter().zip(&measured).all(|(p, m)| p >= m);
    let comparison = calibrate_upper_bound(target_grid, implied, &measured)?;
    Ok(DilationComparison { prediction, measured, comparison, uncalibrated_dominates })
}

/// Source constants at resonant `λ̃` against dilated constants at `λ̃^α` for a
/// diagonal observation, with `μ = γ = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct LosslessnessReport {
    pub alpha: f64,
    pub tilde_grid: Vec<f64>,
    pub source: Vec<f64>,
    pub dilated: Vec<f64>,
    pub max_relative_gap: f64,
    pub lossless: bool,
}

pub fn commuting_losslessness_check(
    model: &SpectralModel,
    q: &ObservationOperator,
    alpha: f64,
    tilde_grid: &[f64],
) -> Result<LosslessnessReport> {
    ensure(q.is_diagonal(), || "losslessness needs an observation commuting with P".into())?;
    ensure(alpha > 0.0, || format!("α must be positive, got {alpha}"))?;
    let frequencies = model.base_frequencies();
    for t in tilde_grid {
        ensure(frequencies.iter().any(|r| (r - t).abs() <= GRID_TOL * t.max(1.0)), || {
            format!("λ̃ = {t} is not a frequency of the model")
        })?;
    }
    let dilated_model = model.power(alpha)?;
    let pairs = tilde_grid
        .par_iter()
        .map(|&t| {
            let source = control_constant(model, q, t, 0.0, 0.0)?.value;
            let dilated = control_constant(&dilated_model, q, t.powf(alpha), 0.0, 0.0)?.value;
            Ok((source, dilated))
        })
        .collect::<Result<Vec<_>>>()?;
    let (source, dilated): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let max_relative_gap = source.iter().zip(&dilated).map(|(s, d)| (s - d).abs() / s).fold(0.0, f64::max);
    Ok(LosslessnessReport {
        alpha,
        tilde_grid: tilde_grid.to_vec(),
        source,
        dilated,
        lossless: max_relative_gap <= LOSSLESS_TOL,
        max_relative_gap,
    })
}

/// An arc `(start, end)` of the circle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arc {
    pub start: f64,
    pub end: f64,
}

impl Arc {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        ensure(start.is_finite() && end > start && end - start <= 2.0 * PI, || {
            format!("arc ({start}, {end}) must be nonempty and at most 2π long")
        })?;
        Ok(Self { start, end })
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn rotated(&self, shift: f64) -> Self {
        Self { start: self.start + shift, end: self.end + shift }
    }

    fn observation(&self, model: &SpectralModel) -> Result<ObservationOperator> {
        indicator_observation(model, self.start, self.end)
    }
}

/// Normalized constants in `‖u‖ ≤ C λ^{-2+1/α}‖(Δ^α - λ²)u‖ + C‖1_Ω u‖`.
#[derive(Debug, Clone, Serialize)]
pub struct PropagationReport {
    pub alpha: f64,
    pub lambda_grid: Vec<f64>,
    pub constants: Vec<f64>,
    pub fit: ExponentFit,
    pub flat: bool,
}

/// `model` is the base circle model; constants are computed on `Δ^α`.
pub fn fractional_propagation_check(
    model: &SpectralModel,
    omega: Arc,
    alpha: f64,
    lambda_grid: &[f64],
) -> Result<PropagationReport> {
    let fractional = model.power(alpha)?;
    let q = omega.observation(&fractional)?;
    let constants = lambda_grid
        .par_iter()
        .map(|&l| {
            ensure(l > 0.0, || format!("λ must be positive, got {l}"))?;
            Ok(scaled_observability_constant(&fractional, &q, l, l.powf(-2.0 + 1.0 / alpha))?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let fit = fit_exponent(lambda_grid, &constants, f64::INFINITY)?;
    Ok(PropagationReport { alpha, lambda_grid: lambda_grid.to_vec(), flat: fit.slope.abs() <= FLATNESS_TOL, constants, fit })
}

/// Smooth cutoff on the largest arc disjoint from `omega`, with margins.
fn complementary_cutoff(omega: Arc) -> Result<DampingFunctionSpec> {
    let free = 2.0 * PI - omega.length();
    ensure(free > 0.0, || "Ω leaves no room for a cutoff".into())?;
    let margin = CUTOFF_MARGIN * free;
    Ok(DampingFunctionSpec::SmoothBump { start: omega.end + margin, end: omega.end + free - margin, amplitude: 1.0 })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WitnessRatio {
    /// Integer `λ^{1/α}`.
    pub order: u64,
    pub lambda: f64,
    /// `‖(Δ^α - λ²)(χ e_λ)‖ / ‖χ e_λ‖`.
    pub ratio: f64,
}

/// Coefficients of `χ e^{i n x}` on the model's Fourier modes.
fn cutoff_witness(model: &SpectralModel, chi: &DampingFunctionSpec, order: i64) -> Result<CVector> {
    let labels = model.labels();
    let reach = labels.iter().map(|l| (l - order).unsigned_abs()).max().unwrap_or(0) as usize;
    let coeffs = chi.fourier_coefficients(reach)?;
    Ok(labels
        .iter()
        .map(|l| {
            let k = l - order;
            let z = coeffs[k.unsigned_abs() as usize];
            if k >= 0 {
                z
            } else {
                z.conj()
            }
        })
        .collect())
}

/// `model` is the base circle model; `λ = order^α`.
pub fn optimality_witness(model: &SpectralModel, omega: Arc, alpha: f64, order: u64) -> Result<WitnessRatio> {
    ensure(alpha > 0.0, || format!("α must be positive, got {alpha}"))?;
    ensure(order >= 1, || "witness order must be a positive integer".into())?;
    let fractional = model.power(alpha)?;
    let lambda = (order as f64).powf(alpha);
    fractional.check_ceiling(lambda)?;
    let chi = complementary_cutoff(omega)?;
    let witness = cutoff_witness(model, &chi, order as i64)?;
    let shift = lambda * lambda;
    let residual: f64 = fractional
        .eigenvalues()
        .iter()
        .zip(witness.iter())
        .map(|(ev, z)| ((ev - shift) * z.norm()).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = witness.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(WitnessRatio { order, lambda, ratio: residual / norm })
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessLadder {
    pub alpha: f64,
    pub rows: Vec<WitnessRatio>,
    pub fit: ExponentFit,
    /// `2 - 1/α`.
    pub expected_slope: f64,
}

pub fn optimality_ladder(model: &SpectralModel, omega: Arc, alpha: f64, orders: &[u64]) -> Result<WitnessLadder> {
    let rows = orders
        .par_iter()
        .map(|&n| optimality_witness(model, omega, alpha, n))
        .collect::<Result<Vec<_>>>()?;
    let lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let fit = fit_exponent(&lambdas, &ratios, f64::INFINITY)?;
    Ok(WitnessLadder { alpha, rows, fit, expected_slope: 2.0 - 1.0 / alpha })
}

/// Fits of `log K(λ)` against `λ^{1/α}` and against `λ^{1/(2α)}`.
#[derive(Debug, Clone, Serialize)]
pub struct CarlemanReport {
    pub alpha: f64,
    pub lambda_grid: Vec<f64>,
    pub constants: Vec<f64>,
    pub primary: LineFit,
    pub alternative: LineFit,
    pub passed: bool,
}

/// `model` is the base circle model; `K(λ)` is the Schrödinger-type
/// observability constant of `(Δ^α, 1_Ω)`.
pub fn carleman_growth_check(
    model: &SpectralModel,
    omega: Arc,
    alpha: f64,
    lambda_grid: &[f64],
) -> Result<CarlemanReport> {
    ensure(alpha > 0.0, || format!("α must be positive, got {alpha}"))?;
    let fractional = model.power(alpha)?;
    let q = omega.observation(&fractional)?;
    let constants = lambda_grid
        .par_iter()
        .map(|&l| Ok(schrodinger_observability_constant(&fractional, &q, l)?.value))
        .collect::<Result<Vec<f64>>>()?;
    ensure(constants.iter().all(|k| k.is_finite() && *k > 0.0), || "observability fails on the grid".into())?;
    let logs: Vec<f64> = constants.iter().map(|k| k.ln()).collect();
    let abscissa = |p: f64| lambda_grid.iter().map(|l| l.powf(p)).collect::<Vec<f64>>();
    let primary = fit_line(&abscissa(1.0 / alpha), &logs)?;
    let alternative = fit_line(&abscissa(0.5 / alpha), &logs)?;
    Ok(CarlemanReport {
        alpha,
        lambda_grid: lambda_grid.to_vec(),
        passed: primary.r2 >= CARLEMAN_R2 && primary.r2 > alternative.r2,
        constants,
        primary,
        alternative,
    })
}

/// Rotation `u ↦ u(· - shift)` in Fourier coefficients.
pub fn rotate_coefficients(model: &SpectralModel, u: &CVector, shift: f64) -> CVector {
    model
        .labels()
        .iter()
        .zip(u.iter())
        .map(|(l, z)| z * c((*l as f64 * shift).cos(), -(*l as f64 * shift).sin()))
        .collect()
}
