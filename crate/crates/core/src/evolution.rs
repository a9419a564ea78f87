//! Semigroups generated by assembled damped-wave generators: exponentials,
//! energy trajectories, the split into kernel and energy-space parts, decay
//! curves and decay-law fits.
//!
//! Energies are always the homogeneous ones, `‖P^{1/2}u‖² + ‖v‖²`. On a
//! quotient assembly that is the Euclidean norm; on a full assembly it is
//! `‖Jx‖²` with [`energy_projection`].

use ndarray::{s, Array1};
use ndarray_linalg::{JobSvd, SVDDC};
use rayon::prelude::*;
use serde::Serialize;

use crate::control::{calibrate_upper_bound, CalibratedComparison};
use crate::damping::ObservationOperator;
use crate::error::{ensure, LabError, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::regression::{fit_line, LineFit};
use crate::resolvent::{assemble_generator, generator_resolvent_norm, GeneratorAssembly, SINGULAR_TOL};
use crate::spectral::SpectralModel;

/// Allowed relative gap between `e^{tA}` and `(e^{tA/2})²`.
pub const EXPM_SELF_CONSISTENCY: f64 = 1e-9;
pub const DECOMPOSITION_TOL: f64 = 1e-8;
/// Step of the five-point energy derivative.
pub const FD_STEP: f64 = 1e-3;
pub const DISSIPATION_TOL: f64 = 1e-6;
/// Relative increase of a decay curve still counted as monotone.
pub const MONOTONE_TOL: f64 = 1e-9;
pub const MIN_DECAY_POINTS: usize = 10;
pub const MIN_DECAY_DECADES: f64 = 1.5;
/// Random states used to confirm a domination constant.
pub const DOMINATION_SAMPLES: usize = 100;
/// Relative eigenvalue floor when restricting to the observed subspace.
const OBSERVED_FLOOR: f64 = 1e-12;

/// `e^{tA}` with the half-step self-consistency check.
pub fn semigroup_matrix(assembly: &GeneratorAssembly, t: f64) -> Result<CMatrix> {
    ensure(t >= 0.0 && t.is_finite(), || format!("time must be nonnegative, got {t}"))?;
    if t == 0.0 {
        return Ok(linalg::identity(assembly.dim()));
    }
    let full = linalg::expm(&assembly.matrix().mapv(|z| z * t))?;
    let half = linalg::expm(&assembly.matrix().mapv(|z| z * (0.5 * t)))?;
    let defect = linalg::frobenius(&(&full - &half.dot(&half)));
    let scale = linalg::frobenius(&full);
    if defect.is_nan() || defect > EXPM_SELF_CONSISTENCY * scale {
        return Err(LabError::Numeric(format!(
            "matrix exponential at t = {t} is inconsistent: defect {defect:e} against norm {scale:e}, ‖tA‖₁ = {:e}",
            t * linalg::one_norm(assembly.matrix())
        )));
    }
    Ok(full)
}

/// Homogeneous energy `‖P^{1/2}u‖² + ‖v‖²` of a state.
pub fn energy(assembly: &GeneratorAssembly, x: &CVector) -> f64 {
    let freqs = assembly.model().frequencies();
    let weights = assembly.position_weights();
    let positions: f64 = assembly
        .position_modes()
        .iter()
        .enumerate()
        .map(|(i, &k)| (freqs[k] / weights[i]).powi(2) * x[i].norm_sqr())
        .sum();
    let velocity: f64 = x.slice(s![assembly.position_dim()..]).iter().map(|z| z.norm_sqr()).sum();
    positions + velocity
}

fn require_full(assembly: &GeneratorAssembly) -> Result<()> {
    ensure(!assembly.quotiented(), || "expected a full (non-quotiented) assembly".into())
}

/// `J`: full coordinates to quotient coordinates. Kernel positions are
/// dropped, the other positions rescaled from `Λ^{1/2}` to `P^{1/2}`.
pub fn energy_projection(full: &GeneratorAssembly) -> Result<CMatrix> {
    require_full(full)?;
    let model = full.model();
    let n = model.dim();
    let freqs = model.frequencies();
    let nonkernel = model.nonkernel_indices();
    let na = nonkernel.len();
    let mut j = CMatrix::zeros((na + n, 2 * n));
    for (i, &k) in nonkernel.iter().enumerate() {
        j[(i, k)] = c(freqs[k] / (1.0 + freqs[k] * freqs[k]).sqrt(), 0.0);
    }
    for k in 0..n {
        j[(na + k, n + k)] = c(1.0, 0.0);
    }
    Ok(j)
}

/// Right inverse of [`energy_projection`] with zero kernel positions.
pub fn energy_lift(full: &GeneratorAssembly) -> Result<CMatrix> {
    require_full(full)?;
    let model = full.model();
    let n = model.dim();
    let freqs = model.frequencies();
    let nonkernel = model.nonkernel_indices();
    let na = nonkernel.len();
    let mut lift = CMatrix::zeros((2 * n, na + n));
    for (i, &k) in nonkernel.iter().enumerate() {
        lift[(k, i)] = c((1.0 + freqs[k] * freqs[k]).sqrt() / freqs[k], 0.0);
    }
    for k in 0..n {
        lift[(n + k, na + k)] = c(1.0, 0.0);
    }
    Ok(lift)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    pub times: Vec<f64>,
    /// Spectral norm of `e^{tA} - (Π_• J^♯ e^{tȦ} J Π_• + e^{tA}Π)` per time.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub worst_time: f64,
    /// `‖Π² - Π‖`.
    pub idempotency_defect: f64,
    /// Largest gap between `‖e^{tA}x‖_Ḣ` and `‖e^{tȦ}JΠ_• x‖` over the probe states.
    pub energy_gap: f64,
    pub passed: bool,
}

/// Checks `e^{tA} = Π_• J^♯ e^{tȦ} J Π_• + (I + tA)Π` for a projector `Π`
/// onto the generalised kernel; `(I + tA)Π = e^{tA}Π` since `A²Π = 0`.
pub fn decomposition_check(
    full: &GeneratorAssembly,
    projector: &CMatrix,
    times: &[f64],
    seed: u64,
) -> Result<DecompositionReport> {
    require_full(full)?;
    ensure(!times.is_empty(), || "no times to check".into())?;
    let n = full.dim();
    if projector.dim() != (n, n) {
        return Err(LabError::DimensionMismatch { expected: n, actual: projector.nrows() });
    }
    let quotient = assemble_generator(full.model(), full.observation(), true)?;
    let j = energy_projection(full)?;
    let lift = energy_lift(full)?;
    let complement = linalg::identity(n) - projector;
    let idempotency_defect = linalg::spectral_norm(&(projector.dot(projector) - projector))?;
    let kernel_part = |t: f64| projector + &full.matrix().dot(projector).mapv(|z| z * t);
    let projected = j.dot(&complement);
    let mut rng = linalg::seeded_rng(seed);
    let probes: Vec<CVector> = (0..4).map(|_| linalg::random_unit_vector(&mut rng, n)).collect();
    let rows = times
        .par_iter()
        .map(|&t| {
            let whole = semigroup_matrix(full, t)?;
            let reduced = semigroup_matrix(&quotient, t)?;
            let rebuilt = complement.dot(&lift).dot(&reduced).dot(&projected) + kernel_part(t);
            let residual = linalg::spectral_norm(&(&whole - &rebuilt))?;
            let gap = probes
                .iter()
                .map(|x| {
                    let direct = energy(full, &whole.dot(x)).sqrt();
                    let via = linalg::vector_norm(&reduced.dot(&projected.dot(x)));
                    (direct - via).abs()
                })
                .fold(0.0, f64::max);
            Ok((residual, gap))
        })
        .collect::<Result<Vec<_>>>()?;
    let residuals: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let energy_gap = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let (worst, max_residual) =
        residuals.iter().enumerate().fold((0, 0.0), |acc, (i, r)| if *r > acc.1 { (i, *r) } else { acc });
    Ok(DecompositionReport {
        times: times.to_vec(),
        passed: max_residual <= DECOMPOSITION_TOL && idempotency_defect <= DECOMPOSITION_TOL,
        worst_time: times[worst],
        residuals,
        max_residual,
        idempotency_defect,
        energy_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayKind {
    Exponential,
    Power,
    LogPower,
}

/// One candidate law. `parameter` is the rate `c` in `e^{-ct}`, the exponent
/// `p` in `t^{-p}`, or the exponent `p` in `log(2+t)^{-p}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayLaw {
    pub kind: DecayKind,
    pub parameter: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub best: DecayLaw,
    pub candidates: Vec<DecayLaw>,
}

impl DecayFit {
    pub fn law(&self, kind: DecayKind) -> DecayLaw {
        *self.candidates.iter().find(|l| l.kind == kind).expect("every kind is fitted")
    }
}

/// Fits the three decay laws on the positive times and keeps the best `R²`.
pub fn fit_decay_law(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(LabError::DimensionMismatch { expected: times.len(), actual: values.len() });
    }
    let (t, y): (Vec<f64>, Vec<f64>) =
        times.iter().zip(values).filter(|(t, _)| **t > 0.0).map(|(t, v)| (*t, *v)).unzip();
    if t.len() < MIN_DECAY_POINTS {
        return Err(LabError::InsufficientData { required: MIN_DECAY_POINTS, actual: t.len() });
    }
    ensure(y.iter().all(|v| *v > 0.0 && v.is_finite()), || "decay values must be positive".into())?;
    let (lo, hi) = t.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    let decades = (hi / lo).log10();
    ensure(decades >= MIN_DECAY_DECADES, || format!("times span {decades:.2} decades, need {MIN_DECAY_DECADES}"))?;
    let logs: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let fit = |x: Vec<f64>| fit_line(&x, &logs);
    let law = |kind, line: LineFit| DecayLaw { kind, parameter: -line.slope, intercept: line.intercept, r2: line.r2 };
    let candidates = vec![
        law(DecayKind::Exponential, fit(t.clone())?),
        law(DecayKind::Power, fit(t.iter().map(|v| v.ln()).collect())?),
        law(DecayKind::LogPower, fit(t.iter().map(|v| (2.0 + v).ln().ln()).collect())?),
    ];
    let best = *candidates.iter().max_by(|a, b| a.r2.total_cmp(&b.r2)).expect("three candidates");
    Ok(DecayFit { best, candidates })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayCurve {
    pub times: Vec<f64>,
    /// `N(t) = ‖e^{tȦ} Ȧ^{-1}‖`.
    pub values: Vec<f64>,
    pub monotone: bool,
    /// Absent when the times do not support a fit.
    pub fit: Option<DecayFit>,
}

fn require_invertible(quotient: &GeneratorAssembly) -> Result<CMatrix> {
    let (pair, scale) = linalg::singular_extremes(quotient.matrix())?;
    if pair.value <= SINGULAR_TOL * scale {
        return Err(LabError::HypothesisViolation(
            "the energy-space generator is singular: unique continuation fails for this damping".into(),
        ));
    }
    linalg::inverse(quotient.matrix())
}

pub fn decay_curve(quotient: &GeneratorAssembly, times: &[f64]) -> Result<DecayCurve> {
    ensure(quotient.quotiented(), || "decay curves live on the quotient assembly".into())?;
    ensure(times.windows(2).all(|w| w[0] < w[1]) && times.first().is_some_and(|t| *t >= 0.0), || {
        "times must be nonnegative and strictly ascending".into()
    })?;
    let inverse = require_invertible(quotient)?;
    let values = times
        .par_iter()
        .map(|&t| linalg::spectral_norm(&semigroup_matrix(quotient, t)?.dot(&inverse)))
        .collect::<Result<Vec<f64>>>()?;
    let monotone = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + MONOTONE_TOL));
    Ok(DecayCurve { times: times.to_vec(), fit: fit_decay_law(times, &values).ok(), values, monotone })
}

/// `-max Re σ(Ȧ)`, the asymptotic exponential rate.
pub fn spectral_gap(quotient: &GeneratorAssembly) -> Result<f64> {
    ensure(quotient.quotiented(), || "the gap is taken on the quotient assembly".into())?;
    Ok(-linalg::eigenvalues(quotient.matrix())?.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyTrajectory {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// `2‖Qv(t)‖²`.
    pub dissipation: Vec<f64>,
}

fn initial_state(assembly: &GeneratorAssembly, u0: &CVector, v0: &CVector) -> Result<CVector> {
    assembly.state(u0, v0)
}

fn dissipation_rate(q: &ObservationOperator, assembly: &GeneratorAssembly, x: &CVector) -> f64 {
    2.0 * q.observed_norm(&assembly.velocity(x)).powi(2)
}

pub fn energy_trajectory(
    assembly: &GeneratorAssembly,
    u0: &CVector,
    v0: &CVector,
    times: &[f64],
) -> Result<EnergyTrajectory> {
    let x0 = initial_state(assembly, u0, v0)?;
    let states = times
        .par_iter()
        .map(|&t| Ok(semigroup_matrix(assembly, t)?.dot(&x0)))
        .collect::<Result<Vec<CVector>>>()?;
    let q = assembly.observation();
    Ok(EnergyTrajectory {
        times: times.to_vec(),
        energies: states.iter().map(|x| energy(assembly, x)).collect(),
        dissipation: states.iter().map(|x| dissipation_rate(q, assembly, x)).collect(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationRow {
    pub time: f64,
    pub derivative: f64,
    pub dissipation: f64,
    /// `|dE/dt + 2‖Qv‖²|` relative to `max(2‖Qv‖², 1e-3 E)`.
    pub relative_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationReport {
    pub rows: Vec<DissipationRow>,
    pub max_relative_error: f64,
    pub passed: bool,
}

/// Compares the five-point derivative of the energy with `-2‖Qv‖²`.
pub fn dissipation_check(
    assembly: &GeneratorAssembly,
    u0: &CVector,
    v0: &CVector,
    times: &[f64],
) -> Result<DissipationReport> {
    ensure(times.iter().all(|t| *t >= 2.0 * FD_STEP), || format!("times must be at least {}", 2.0 * FD_STEP))?;
    let x0 = initial_state(assembly, u0, v0)?;
    let step = semigroup_matrix(assembly, FD_STEP)?;
    let q = assembly.observation();
    let rows = times
        .par_iter()
        .map(|&t| {
            let mut x = semigroup_matrix(assembly, t - 2.0 * FD_STEP)?.dot(&x0);
            let mut e = [0.0; 5];
            let mut centre = 0.0;
            for (k, slot) in e.iter_mut().enumerate() {
                *slot = energy(assembly, &x);
                if k == 2 {
                    centre = dissipation_rate(q, assembly, &x);
                }
                x = step.dot(&x);
            }
            let derivative = (e[0] - 8.0 * e[1] + 8.0 * e[3] - e[4]) / (12.0 * FD_STEP);
            let scale = centre.max(1e-3 * e[2]).max(f64::MIN_POSITIVE);
            Ok(DissipationRow {
                time: t,
                derivative,
                dissipation: centre,
                relative_error: (derivative + centre).abs() / scale,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_relative_error = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    Ok(DissipationReport { rows, max_relative_error, passed: max_relative_error <= DISSIPATION_TOL })
}

/// Growth of a resolvent bound `K(λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResolventGrowth {
    Power { exponent: f64 },
    Exponential { rate: f64 },
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecayRate {
    /// Value of `1/K^{-1}(t)`.
    Rate { value: f64 },
    /// Bounded resolvent: decay is exponential.
    Exponential,
}

/// `1 / K^{-1}(t)`.
pub fn rate_translate(growth: ResolventGrowth, t: f64) -> Result<DecayRate> {
    match growth {
        ResolventGrowth::Power { exponent } => {
            ensure(exponent > 0.0, || format!("power growth needs a positive exponent, got {exponent}"))?;
            ensure(t > 0.0, || format!("power rates need t > 0, got {t}"))?;
            Ok(DecayRate::Rate { value: t.powf(-1.0 / exponent) })
        }
        ResolventGrowth::Exponential { rate } => {
            ensure(rate > 0.0, || format!("exponential growth needs a positive rate, got {rate}"))?;
            ensure(t > 1.0, || format!("exponential growth inverts only for t > 1, got {t}"))?;
            Ok(DecayRate::Rate { value: rate / t.ln() })
        }
        ResolventGrowth::Constant => Ok(DecayRate::Exponential),
    }
}

/// `sup ‖Q₁u‖/‖Q₂u‖` over `u ⊥ ker P`, through the pencil `(G₁, G₁ + G₂)`
/// restricted to where `G₁ + G₂` is nondegenerate.
pub fn domination_constant(model: &SpectralModel, q1: &ObservationOperator, q2: &ObservationOperator) -> Result<f64> {
    let idx = model.nonkernel_indices();
    let restrict = |g: &CMatrix| g.select(ndarray::Axis(0), &idx).select(ndarray::Axis(1), &idx);
    let g1 = restrict(q1.gram());
    let total = linalg::hermitian_part(&(&g1 + &restrict(q2.gram())));
    let (values, vectors) = linalg::hermitian_eigen(&total)?;
    let top = values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..values.len()).filter(|&k| values[k] > OBSERVED_FLOOR * top).collect();
    ensure(!keep.is_empty(), || "both observations vanish".into())?;
    let scale: Array1<f64> = keep.iter().map(|&k| values[k].powf(-0.5)).collect();
    let basis = linalg::scale_cols(&vectors.select(ndarray::Axis(1), &keep), &scale);
    let reduced = linalg::hermitian_part(&linalg::adjoint(&basis).dot(&g1).dot(&basis));
    let share = linalg::hermitian_eigenvalues(&reduced)?.iter().cloned().fold(0.0, f64::max);
    if share >= 1.0 - 1e-9 {
        return Err(LabError::InvalidArgument("the second observation does not dominate the first".into()));
    }
    Ok((share / (1.0 - share)).max(0.0).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakMonotonicityReport {
    pub domination_constant: f64,
    /// Largest `‖Q₁u‖ / (C₀‖Q₂u‖)` over random `u ⊥ ker P`.
    pub random_check_ratio: f64,
    pub lambda_grid: Vec<f64>,
    pub resolvent_weak: Vec<f64>,
    pub resolvent_strong: Vec<f64>,
    /// Prediction for the stronger damping's resolvent from the weaker one's.
    pub comparison: CalibratedComparison,
    pub decay_weak: DecayCurve,
    pub decay_strong: DecayCurve,
}

/// Runs the chain resolvent(Q₁) → control(Q₁) → control(Q₂) → resolvent(Q₂)
/// with `μ = γ = 0`: `‖(A₂ + iλ)^{-1}‖ ≤ C max(1, C₀)² ‖(A₁ + iλ)^{-1}‖²`.
pub fn weak_monotonicity_experiment(
    model: &SpectralModel,
    q1: &ObservationOperator,
    q2: &ObservationOperator,
    lambda_grid: &[f64],
    times: &[f64],
    seed: u64,
) -> Result<WeakMonotonicityReport> {
    let c0 = domination_constant(model, q1, q2)?;
    let idx = model.nonkernel_indices();
    let mut rng = linalg::seeded_rng(seed);
    let mut random_check_ratio: f64 = 0.0;
    for _ in 0..DOMINATION_SAMPLES {
        let partial = linalg::random_unit_vector(&mut rng, idx.len());
        let mut u = CVector::zeros(model.dim());
        for (i, &k) in idx.iter().enumerate() {
            u[k] = partial[i];
        }
        let (weak, strong) = (q1.observed_norm(&u), q2.observed_norm(&u));
        if weak > 0.0 {
            random_check_ratio = random_check_ratio.max(weak / (c0 * strong));
        }
    }
    if random_check_ratio > 1.0 + 1e-8 {
        return Err(LabError::InvalidArgument(format!(
            "domination constant {c0} is exceeded by a factor {random_check_ratio} on a random state"
        )));
    }
    let resolvents = |q: &ObservationOperator| -> Result<Vec<f64>> {
        let full = assemble_generator(model, q, false)?;
        lambda_grid.par_iter().map(|&l| Ok(generator_resolvent_norm(&full, c(l, 0.0))?.value)).collect()
    };
    let (resolvent_weak, resolvent_strong) = (resolvents(q1)?, resolvents(q2)?);
    let transfer = c0.max(1.0).powi(2);
    let shape: Vec<f64> = resolvent_weak.iter().map(|r| transfer * r * r).collect();
    let comparison = calibrate_upper_bound(lambda_grid, shape, &resolvent_strong)?;
    let decay_weak = decay_curve(&assemble_generator(model, q1, true)?, times)?;
    let decay_strong = decay_curve(&assemble_generator(model, q2, true)?, times)?;
    Ok(WeakMonotonicityReport {
        domination_constant: c0,
        random_check_ratio,
        lambda_grid: lambda_grid.to_vec(),
        resolvent_weak,
        resolvent_strong,
        comparison,
        decay_weak,
        decay_strong,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BackwardUniquenessReport {
    pub times: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub sigma_max: Vec<f64>,
    pub min_sigma: f64,
    /// Every `σ_min(e^{tA})` exceeds `1e-12 σ_max(e^{tA})`.
    pub injective: bool,
}

pub fn backward_uniqueness_probe(assembly: &GeneratorAssembly, times: &[f64]) -> Result<BackwardUniquenessReport> {
    ensure(times.iter().all(|t| *t > 0.0), || "probe times must be positive".into())?;
    let extremes = times
        .par_iter()
        .map(|&t| {
            let (_, sv, _) = semigroup_matrix(assembly, t)?.svddc(JobSvd::None)?;
            Ok((sv[sv.len() - 1], sv[0]))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sigma_min, sigma_max): (Vec<f64>, Vec<f64>) = extremes.into_iter().unzip();
    Ok(BackwardUniquenessReport {
        times: times.to_vec(),
        min_sigma: sigma_min.iter().cloned().fold(f64::INFINITY, f64::min),
        injective: sigma_min.iter().zip(&sigma_max).all(|(lo, hi)| *lo >= SINGULAR_TOL * hi),
        sigma_min,
        sigma_max,
    })
}
