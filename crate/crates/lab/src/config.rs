use std::fmt;
use std::path::PathBuf;

use dampspec::damping::DampingFunctionSpec;
use dampspec::regression::{linear_spaced, log_spaced};
use dampspec::spectral::{build_circle_model, SpectralModel};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RunError;
use crate::scenario;

/// Largest accepted Fourier cutoff; dense work grows like `K³`.
pub const MAX_CUTOFF: usize = 2048;

/// One experiment, as read from a TOML file.
///
/// Physical parameters have no defaults; only tolerances do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub model: ModelSpec,
    pub damping: DampingSpec,
    pub propagator: PropagatorSpec,
    pub lambda_grid: Option<GridSpec>,
    pub time_grid: Option<GridSpec>,
    pub weights: Weights,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeometrySpec {
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub geometry: GeometrySpec,
    pub cutoff: usize,
}

/// Damping profiles and how they compose into an observation.
///
/// `profiles` are superposed into one `sqrt(W)`, except in the monotonicity
/// scenario where they are read as `[weaker, stronger]`. Profiles are angles in
/// radians on `[0, 2pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSpec {
    pub profiles: Vec<DampingFunctionSpec>,
    /// Order `s` of the `|D|^s` factor composed on the right.
    pub fractional: Option<f64>,
    /// Viscous and structural profiles; replaces `profiles` when present.
    pub structural: Option<StructuralPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructuralPair {
    pub viscous: DampingFunctionSpec,
    pub elastic: DampingFunctionSpec,
}

/// Which function of the Laplacian drives the wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PropagatorSpec {
    /// `Δ^α`.
    Power { alpha: f64 },
    /// A non-power calculus function; its dilation exponent is fixed by the family.
    Calculus { family: CalculusFamily },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalculusFamily {
    /// `s + s²`.
    Quadratic,
    /// `s (1 + log(1 + s))`.
    LogCorrected,
}

impl CalculusFamily {
    /// Exponent `α` in the growth bound `f(t) - f(s) ≥ K^{-1} s^{α-1}(t - s)`.
    pub fn alpha(self) -> f64 {
        match self {
            Self::Quadratic => 2.0,
            Self::LogCorrected => 1.0,
        }
    }

    /// Constant `K` in the same bound.
    pub fn growth_constant(self) -> f64 {
        match self {
            Self::Quadratic => 0.5,
            Self::LogCorrected => 1.0,
        }
    }
}

impl PropagatorSpec {
    pub fn alpha(&self) -> f64 {
        match self {
            Self::Power { alpha } => *alpha,
            Self::Calculus { family } => family.alpha(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    Log,
    Linear,
    /// `n^α` for integers `n` in `[min, max]`, with `α` the propagator exponent.
    Resonant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    /// Required for log and linear spacing, ignored for resonant ladders.
    pub points: Option<usize>,
    pub spacing: Spacing,
}

impl GridSpec {
    pub fn values(&self, alpha: f64) -> Result<Vec<f64>, RunError> {
        match self.spacing {
            Spacing::Log => Ok(log_spaced(self.min, self.max, self.points.unwrap_or(0))?),
            Spacing::Linear => Ok(linear_spaced(self.min, self.max, self.points.unwrap_or(0))?),
            Spacing::Resonant => Ok(self.orders().into_iter().map(|n| (n as f64).powf(alpha)).collect()),
        }
    }

    /// Integer ladder of a resonant grid.
    pub fn orders(&self) -> Vec<u64> {
        let lo = self.min.max(1.0).ceil() as u64;
        let hi = self.max.floor().max(0.0) as u64;
        (lo..=hi).collect()
    }

    /// Largest `λ` the grid produces.
    pub fn top(&self, alpha: f64) -> f64 {
        match self.spacing {
            Spacing::Resonant => self.max.floor().powf(alpha),
            _ => self.max,
        }
    }
}

/// Weights `Λ^μ` on the pencil and `Λ^γ` on the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Weights {
    pub mu: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Allowed distance between a fitted and a predicted exponent.
    pub slope: f64,
    /// Largest `|slope|` accepted as flat.
    pub flatness: f64,
    /// Decades, counted down from the top of the grid, used by exponent fits.
    pub fit_window: f64,
    /// Smallest accepted `R²` of a decay fit.
    pub r2: f64,
    /// Relative tolerance between a decay rate and the spectral gap.
    pub rate: f64,
    /// Margin above `1/p` for the `L^p` resolvent exponent.
    pub lp_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { slope: 0.15, flatness: 0.1, fit_window: 1.0, r2: 0.99, rate: 0.1, lp_margin: 0.2 }
    }
}

/// One offending field and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        toml::from_str(text).map_err(|e| RunError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, RunError> {
        toml::to_string(self).map_err(|e| RunError::Parse(e.to_string()))
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded. The output
    /// location does not enter the hash.
    pub fn hash(&self) -> Result<String, RunError> {
        let keyed = Self { output: None, ..self.clone() };
        Ok(hex::encode(Sha256::digest(keyed.to_toml()?.as_bytes())))
    }

    pub fn base_model(&self) -> Result<SpectralModel, RunError> {
        match self.model.geometry {
            GeometrySpec::Circle => Ok(build_circle_model(self.model.cutoff)?),
        }
    }

    /// The base model carried through `Δ^α`.
    pub fn model(&self) -> Result<SpectralModel, RunError> {
        Ok(self.base_model()?.power(self.propagator.alpha())?)
    }

    pub fn lambda_values(&self) -> Result<Vec<f64>, RunError> {
        self.lambda_grid
            .as_ref()
            .ok_or_else(|| missing("lambda_grid"))?
            .values(self.propagator.alpha())
    }

    pub fn time_values(&self) -> Result<Vec<f64>, RunError> {
        self.time_grid.as_ref().ok_or_else(|| missing("time_grid"))?.values(1.0)
    }

    /// `(K/4)^α`, the largest admissible `λ`.
    pub fn ceiling(&self) -> f64 {
        (self.model.cutoff as f64 / 4.0).powf(self.propagator.alpha())
    }
}

fn missing(field: &str) -> RunError {
    RunError::Invalid(vec![FieldError { field: field.into(), message: "required by this command".into() }])
}

/// Field-level validation; returns every problem found.
pub fn validate_config(config: &ExperimentConfig) -> Result<(), RunError> {
    let mut errors = Vec::new();
    let mut push = |field: &str, message: String| errors.push(FieldError { field: field.into(), message });

    if scenario::lookup(&config.scenario).is_none() {
        push("scenario", format!("unknown scenario '{}' (known: {})", config.scenario, scenario::names().join(", ")));
    }
    if !(2..=MAX_CUTOFF).contains(&config.model.cutoff) {
        push("model.cutoff", format!("must lie in [2, {MAX_CUTOFF}], got {}", config.model.cutoff));
    }
    let alpha = config.propagator.alpha();
    if !(alpha > 0.0 && alpha.is_finite()) {
        push("propagator.alpha", format!("must be positive, got {alpha}"));
    }
    for (i, profile) in config.damping.profiles.iter().enumerate() {
        if let Err(e) = profile.validate() {
            push(&format!("damping.profiles[{i}]"), e.to_string());
        }
    }
    if let Some(pair) = &config.damping.structural {
        for (name, profile) in [("viscous", &pair.viscous), ("elastic", &pair.elastic)] {
            if let Err(e) = profile.validate() {
                push(&format!("damping.structural.{name}"), e.to_string());
            }
        }
    }
    if config.damping.profiles.is_empty() && config.damping.structural.is_none() {
        push("damping.profiles", "at least one profile is required".into());
    }
    if let Some(s) = config.damping.fractional {
        if !(s >= 0.0 && s.is_finite()) {
            push("damping.fractional", format!("must be nonnegative, got {s}"));
        }
    }
    for (name, value) in [("weights.mu", config.weights.mu), ("weights.gamma", config.weights.gamma)] {
        if !(value >= 0.0 && value.is_finite()) {
            push(name, format!("must be nonnegative, got {value}"));
        }
    }
    if let Some(grid) = &config.lambda_grid {
        check_grid("lambda_grid", grid, &mut push);
        let ceiling = config.ceiling();
        let top = grid.top(alpha);
        if alpha > 0.0 && top > ceiling * (1.0 + 1e-12) {
            push(
                "lambda_grid.max",
                format!(
                    "λ_max = {top} exceeds the truncation ceiling {ceiling} (ρ_max = {}, cutoff {})",
                    (config.model.cutoff as f64).powf(alpha),
                    config.model.cutoff
                ),
            );
        }
    }
    if let Some(grid) = &config.time_grid {
        check_grid("time_grid", grid, &mut push);
        if grid.spacing == Spacing::Resonant {
            push("time_grid.spacing", "time grids are log or linear".into());
        }
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(RunError::Invalid(errors))
    }
}

fn check_grid(field: &str, grid: &GridSpec, push: &mut impl FnMut(&str, String)) {
    let lower = if field == "time_grid" && grid.spacing == Spacing::Linear { 0.0 } else { f64::MIN_POSITIVE };
    if !(grid.min >= lower && grid.min.is_finite()) {
        push(&format!("{field}.min"), format!("must be at least {lower}, got {}", grid.min));
    }
    if !(grid.max > grid.min && grid.max.is_finite()) {
        push(&format!("{field}.max"), format!("must exceed min = {}, got {}", grid.min, grid.max));
    }
    match grid.spacing {
        Spacing::Log | Spacing::Linear => {
            if grid.points.is_none_or(|p| p < 2) {
                push(&format!("{field}.points"), "at least two points are required".into());
            }
        }
        Spacing::Resonant => {
            if grid.orders().len() < 2 {
                push(&format!("{field}.max"), "a resonant ladder needs at least two integers".into());
            }
        }
    }
}
