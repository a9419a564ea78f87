//! Observation operators `Q` in the spectral basis of a circle model.
//!
//! A multiplier damping `W` is represented through its Galerkin damping matrix
//! `G_{jk} = (1/2pi) ∫ W e^{i(l_k - l_j)x} dx`, so `u^* G u = ∫ W |u|^2` exactly
//! on the truncated space. `Q` is the positive square root of `G`; hence
//! `Q^* Q = G`, the observation space is the truncated Fourier space, and
//! additivity in `W` holds exactly.

use std::f64::consts::PI;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::fourier::{sample_coefficients, segment_coefficients, Segment};
use crate::linalg::{self, adjoint, c, CMatrix, CVector};
use crate::spectral::{lambda_power, Geometry, SpectralModel};

/// Relative growth tolerated along a cutoff ladder before a candidate
/// unboundedness degree is declared unstable.
pub const LADDER_GROWTH_TOL: f64 = 0.05;

/// Nonnegative damping profile on the circle `[0, 2pi)`. Intervals are given in
/// radians and may wrap around.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DampingFunctionSpec {
    Indicator { start: f64, end: f64, amplitude: f64 },
    /// `amplitude * (x - start)^{-exponent}` on `(start, end)`.
    PowerSingular { start: f64, end: f64, exponent: f64, amplitude: f64 },
    /// `amplitude * exp(1 - 1/(1 - t^2))` with `t` the rescaled position in `(start, end)`.
    SmoothBump { start: f64, end: f64, amplitude: f64 },
    Constant { amplitude: f64 },
    /// Uniform samples on `[0, 2pi)`.
    CustomSamples { values: Vec<f64> },
}

pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

impl DampingFunctionSpec {
    pub fn indicator(start: f64, end: f64) -> Self {
        Self::Indicator { start, end, amplitude: 1.0 }
    }

    pub fn constant(amplitude: f64) -> Self {
        Self::Constant { amplitude }
    }

    pub fn validate(&self) -> Result<()> {
        let interval = |start: f64, end: f64| {
            ensure(start.is_finite() && end.is_finite() && start < end && end - start <= 2.0 * PI, || {
                format!("interval ({start}, {end}) must be nonempty and at most 2pi long")
            })
        };
        let amplitude_ok = |a: f64| ensure(a >= 0.0 && a.is_finite(), || format!("negative damping amplitude {a}"));
        match self {
            Self::Indicator { start, end, amplitude } | Self::SmoothBump { start, end, amplitude } => {
                interval(*start, *end)?;
                amplitude_ok(*amplitude)
            }
            Self::PowerSingular { start, end, exponent, amplitude } => {
                interval(*start, *end)?;
                amplitude_ok(*amplitude)?;
                ensure((0.0..1.0).contains(exponent), || {
                    format!("singular exponent {exponent} must lie in [0, 1)")
                })
            }
            Self::Constant { amplitude } => amplitude_ok(*amplitude),
            Self::CustomSamples { values } => ensure(
                !values.is_empty() && values.iter().all(|v| v.is_finite() && *v >= 0.0),
                || "custom samples must be finite and nonnegative".into(),
            ),
        }
    }

    /// Largest `p` with `W ∈ L^q` for all `q < p`; infinite for bounded profiles.
    pub fn integrability_limit(&self) -> f64 {
        match self {
            Self::PowerSingular { exponent, .. } if *exponent > 0.0 => 1.0 / exponent,
            _ => f64::INFINITY,
        }
    }

    /// Pointwise value, periodically extended.
    pub fn evaluate(&self, x: f64) -> f64 {
        let offset = |start: f64| (x - start).rem_euclid(2.0 * PI);
        match self {
            Self::Indicator { start, end, amplitude } => {
                if offset(*start) < end - start {
                    *amplitude
                } else {
                    0.0
                }
            }
            Self::PowerSingular { start, end, exponent, amplitude } => {
                let y = offset(*start);
                if y > 0.0 && y < end - start {
                    amplitude * y.powf(-exponent)
                } else {
                    0.0
                }
            }
            Self::SmoothBump { start, end, amplitude } => {
                let y = offset(*start);
                let half = 0.5 * (end - start);
                amplitude * bump((y - half) / half)
            }
            Self::Constant { amplitude } => *amplitude,
            Self::CustomSamples { values } => {
                let n = values.len();
                let idx = ((x.rem_euclid(2.0 * PI)) / (2.0 * PI) * n as f64).floor() as usize;
                values[idx.min(n - 1)]
            }
        }
    }

    /// Fourier coefficients `hat W(n)` for `n = 0..=max_harmonic`.
    pub fn fourier_coefficients(&self, max_harmonic: usize) -> Result<CVector> {
        self.validate()?;
        let mut out = CVector::zeros(max_harmonic + 1);
        match self {
            Self::Constant { amplitude } => out[0] = c(*amplitude, 0.0),
            Self::CustomSamples { values } => out = sample_coefficients(values, max_harmonic)?,
            Self::Indicator { start, end, amplitude } => {
                let profile = |_: f64| *amplitude;
                let seg = Segment { start: *start, end: *end, singular_exponent: None, profile: &profile };
                out = segment_coefficients(&[seg], max_harmonic)?;
            }
            Self::PowerSingular { start, end, exponent, amplitude } => {
                let profile = |y: f64| amplitude * y.powf(-exponent);
                let singular = if *exponent > 0.0 { Some(*exponent) } else { None };
                let seg = Segment { start: *start, end: *end, singular_exponent: singular, profile: &profile };
                out = segment_coefficients(&[seg], max_harmonic)?;
            }
            Self::SmoothBump { start, end, amplitude } => {
                let half = 0.5 * (end - start);
                let profile = |y: f64| amplitude * bump((y - half) / half);
                let seg = Segment { start: *start, end: *end, singular_exponent: None, profile: &profile };
                out = segment_coefficients(&[seg], max_harmonic)?;
            }
        }
        Ok(out)
    }
}

/// `Q : H_trunc -> Y` with its Gram matrix `Q^* Q` cached.
#[derive(Debug, Clone)]
pub struct ObservationOperator {
    matrix: CMatrix,
    gram: CMatrix,
    declared_gamma: f64,
    description: String,
}

impl ObservationOperator {
    pub fn new(matrix: CMatrix, declared_gamma: f64, description: impl Into<String>) -> Result<Self> {
        ensure((0.0..=0.5).contains(&declared_gamma), || {
            format!("declared unboundedness {declared_gamma} outside [0, 1/2]")
        })?;
        let gram = adjoint(&matrix).dot(&matrix);
        Ok(Self { matrix, gram, declared_gamma, description: description.into() })
    }

    pub fn zero(model: &SpectralModel) -> Self {
        let n = model.dim();
        Self {
            matrix: CMatrix::zeros((n, n)),
            gram: CMatrix::zeros((n, n)),
            declared_gamma: 0.0,
            description: "zero".into(),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `Q^* Q` on the model's modes.
    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    pub fn declared_gamma(&self) -> f64 {
        self.declared_gamma
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn domain_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn observation_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn apply(&self, u: &CVector) -> CVector {
        self.matrix.dot(u)
    }

    pub fn observed_norm(&self, u: &CVector) -> f64 {
        linalg::vector_norm(&self.apply(u))
    }

    /// `Q` restricted to diagonal form, when it is one.
    pub fn is_diagonal(&self) -> bool {
        self.matrix.is_square()
            && self
                .matrix
                .indexed_iter()
                .all(|((i, j), z)| i == j || *z == c(0.0, 0.0))
    }

    /// Symmetry defect and smallest eigenvalue of the Gram matrix.
    pub fn gram_health(&self) -> Result<(f64, f64)> {
        let asym = linalg::asymmetry(&self.gram);
        let evs = linalg::hermitian_eigenvalues(&self.gram)?;
        Ok((asym, evs.iter().cloned().fold(f64::INFINITY, f64::min)))
    }
}

fn require_circle(model: &SpectralModel) -> Result<()> {
    ensure(model.geometry() == Geometry::Circle, || {
        "multiplier observations need a circle model (labels are wavenumbers)".into()
    })
}

/// Galerkin damping matrix `G_{jk} = hat W(l_j - l_k)` of a superposition of profiles.
pub fn damping_matrix(model: &SpectralModel, profiles: &[DampingFunctionSpec]) -> Result<CMatrix> {
    require_circle(model)?;
    let labels = model.labels();
    let max_label = labels.iter().map(|l| l.unsigned_abs() as usize).max().unwrap_or(0);
    let max_harmonic = 2 * max_label;
    let mut coeffs = CVector::zeros(max_harmonic + 1);
    for profile in profiles {
        coeffs = coeffs + profile.fourier_coefficients(max_harmonic)?;
    }
    let n = model.dim();
    Ok(CMatrix::from_shape_fn((n, n), |(j, k)| {
        let d = labels[j] - labels[k];
        let z = coeffs[d.unsigned_abs() as usize];
        if d >= 0 {
            z
        } else {
            z.conj()
        }
    }))
}

/// `u -> sqrt(W) u`, with `W` a superposition of nonnegative profiles.
pub fn superposed_observation(
    model: &SpectralModel,
    profiles: &[DampingFunctionSpec],
    description: impl Into<String>,
) -> Result<ObservationOperator> {
    let gram = linalg::hermitian_part(&damping_matrix(model, profiles)?);
    let matrix = linalg::psd_sqrt(&gram)?;
    ObservationOperator::new(matrix, 0.0, description)
}

pub fn multiplier_observation(model: &SpectralModel, profile: &DampingFunctionSpec) -> Result<ObservationOperator> {
    superposed_observation(model, std::slice::from_ref(profile), describe(profile))
}

fn describe(profile: &DampingFunctionSpec) -> String {
    match profile {
        DampingFunctionSpec::Indicator { start, end, .. } => format!("indicator({start},{end})"),
        DampingFunctionSpec::PowerSingular { start, end, exponent, .. } => {
            format!("power-singular({start},{end};{exponent})")
        }
        DampingFunctionSpec::SmoothBump { start, end, .. } => format!("bump({start},{end})"),
        DampingFunctionSpec::Constant { amplitude } => format!("constant({amplitude})"),
        DampingFunctionSpec::CustomSamples { values } => format!("samples({})", values.len()),
    }
}

pub fn indicator_observation(model: &SpectralModel, start: f64, end: f64) -> Result<ObservationOperator> {
    ensure(end > start && end - start <= 2.0 * PI, || format!("empty or overlong interval ({start}, {end})"))?;
    multiplier_observation(model, &DampingFunctionSpec::indicator(start, end))
}

/// `Q |D|^s` with `|D|` the square root of the base Laplacian. The declared
/// degree grows by `s / (2 alpha)` for a model of `Delta^alpha`.
pub fn compose_fractional(q: &ObservationOperator, model: &SpectralModel, s: f64) -> Result<ObservationOperator> {
    ensure(s >= 0.0, || format!("fractional order must be nonnegative, got {s}"))?;
    if s == 0.0 {
        return Ok(q.clone());
    }
    let weights = model.base_frequencies().mapv(|r| r.powf(s));
    let matrix = linalg::scale_cols(q.matrix(), &weights);
    let gamma = q.declared_gamma() + s / (2.0 * model.exponent());
    ObservationOperator::new(matrix, gamma, format!("{}|D|^{s}", q.description()))
}

/// `u -> (sqrt(W_v) u, sqrt(W_s) ∇u)` stacked.
pub fn structural_observation(
    model: &SpectralModel,
    viscous: &DampingFunctionSpec,
    structural: &DampingFunctionSpec,
) -> Result<ObservationOperator> {
    let qv = multiplier_observation(model, viscous)?;
    let qs = multiplier_observation(model, structural)?;
    let gradient: CVector = model.labels().iter().map(|&l| c(0.0, l as f64)).collect();
    let mut grad_block = qs.matrix().clone();
    for (mut col, g) in grad_block.columns_mut().into_iter().zip(gradient.iter()) {
        col.mapv_inplace(|z| z * g);
    }
    let n = model.dim();
    let mut matrix = CMatrix::zeros((2 * n, n));
    matrix.slice_mut(ndarray::s![..n, ..]).assign(qv.matrix());
    matrix.slice_mut(ndarray::s![n.., ..]).assign(&grad_block);
    let sees_gradient = structural.fourier_coefficients(0)?[0].re > 0.0;
    let gamma = if sees_gradient { 1.0 / (2.0 * model.exponent()) } else { 0.0 };
    ObservationOperator::new(matrix, gamma.min(0.5), format!("structural[{};{}]", qv.description(), qs.description()))
}

/// `‖Q Λ^{-gamma}‖` on one rung of the ladder.
pub fn weighted_norm(q: &ObservationOperator, model: &SpectralModel, gamma: f64) -> Result<f64> {
    let weights = lambda_power(model, -gamma);
    let weighted = linalg::scale_rows(&weights, &linalg::scale_cols(q.gram(), &weights));
    let top = linalg::hermitian_eigenvalues(&weighted)?;
    Ok(top.iter().cloned().fold(0.0, f64::max).max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaMeasurement {
    pub gamma_hat: f64,
    pub saturated: bool,
    /// `(gamma, norms along the ladder)`.
    pub table: Vec<(f64, Vec<f64>)>,
}

/// Smallest candidate whose weighted norm is stable along a cutoff ladder.
pub fn measure_gamma(ladder: &[(SpectralModel, ObservationOperator)], candidates: &[f64]) -> Result<GammaMeasurement> {
    ensure(ladder.len() >= 2, || "measure_gamma needs at least two cutoffs".into())?;
    ensure(candidates.iter().all(|g| (0.0..=0.5).contains(g)), || "candidates must lie in [0, 1/2]".into())?;
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut table = Vec::with_capacity(sorted.len());
    let mut gamma_hat = None;
    for &gamma in &sorted {
        let norms = ladder
            .iter()
            .map(|(model, q)| weighted_norm(q, model, gamma))
            .collect::<Result<Vec<f64>>>()?;
        let stable = norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + LADDER_GROWTH_TOL));
        if stable && gamma_hat.is_none() {
            gamma_hat = Some(gamma);
        }
        table.push((gamma, norms));
    }
    Ok(GammaMeasurement { gamma_hat: gamma_hat.unwrap_or(0.5), saturated: gamma_hat.is_none(), table })
}

/// `‖1_Ω u‖` through the Galerkin matrix of the indicator.
pub fn localized_norm(model: &SpectralModel, start: f64, end: f64, u: &CVector) -> Result<f64> {
    let g = damping_matrix(model, &[DampingFunctionSpec::indicator(start, end)])?;
    Ok(linalg::inner(u, &g.dot(u)).re.max(0.0).sqrt())
}

/// Modulation `diag(e^{-i l shift})`, which conjugates a profile rotated by `shift`.
pub fn modulation(model: &SpectralModel, shift: f64) -> Array1<crate::linalg::C64> {
    model.labels().iter().map(|&l| c((l as f64 * shift).cos(), -(l as f64 * shift).sin())).collect()
}
