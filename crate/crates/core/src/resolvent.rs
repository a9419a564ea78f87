//! The damped pencil `P_λ = P - iλ Q*Q - λ²`, the wave generator in energy
//! coordinates, and measurements of their inverses along real grids and rays.
//!
//! Generator coordinates are `(a, b)` with `a` a weighted position on a subset
//! of modes and `b` the velocity on every mode. Position coordinate `i` sits
//! on mode `m(i)` and the generator reads
//!
//! ```text
//! a_i' = lift_i b_{m(i)},    b' = -S(restoring ∘ a) - Q*Q b,
//! ```
//!
//! with `lift_i * restoring_i = ρ_{m(i)}²`. The full assembly weights every
//! position by `(1 + ρ²)^{1/2}`, so the Euclidean norm is the `H_{1/2} × H`
//! norm. The quotient assembly keeps only nonkernel positions weighted by `ρ`,
//! so the Euclidean norm is the energy.

use std::f64::consts::PI;

use ndarray::{s, Array1};
use ndarray_linalg::{JobSvd, SVDDC};
use rayon::prelude::*;
use serde::Serialize;

use crate::damping::ObservationOperator;
use crate::error::{ensure, LabError, Result};
use crate::linalg::{self, c, CMatrix, CVector, InverseMap, LinearMap, C64, DENSE_LIMIT, LANCZOS_TOL};
use crate::regression::fit_line;
use crate::spectral::{lambda_power, SpectralModel};

/// A matrix counts as singular when `σ_min ≤ SINGULAR_TOL · ‖A‖`.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Unique continuation passes when `σ_min(P_λ) > UCP_TOL · ‖P_λ‖`.
pub const UCP_TOL: f64 = 1e-10;
/// Undamped grids stay this far from every frequency.
pub const RESONANCE_GAP: f64 = 1e-3;
pub const RIESZ_NODES: usize = 64;
/// Default ray direction, slightly clockwise of the negative imaginary axis.
pub const DEFAULT_RAY_ANGLE: f64 = 1.5 * PI - 0.05;
pub const MAX_RAY_OFFSET: f64 = PI / 4.0;
pub const MIN_FIT_POINTS: usize = 8;
/// Relative floating-point allowance for constant-free inequalities.
pub const RELATION_TOL: f64 = 1e-10;
const ZERO_EIGEN_TOL: f64 = 1e-7;
const CONTOUR_MARGIN: f64 = 0.05;
const KERNEL_TOL: f64 = 1e-13;
/// Size below which the overlap of unit kernel vectors counts as zero.
const CHAIN_TOL: f64 = 1e-10;

fn check_dims(model: &SpectralModel, q: &ObservationOperator) -> Result<()> {
    if q.domain_dim() != model.dim() {
        return Err(LabError::DimensionMismatch { expected: model.dim(), actual: q.domain_dim() });
    }
    Ok(())
}

/// `diag(ρ²) - iλ Q*Q - λ² Id`.
pub fn assemble_pencil(model: &SpectralModel, q: &ObservationOperator, lambda: C64) -> Result<CMatrix> {
    check_dims(model, q)?;
    let damping_factor = c(0.0, -1.0) * lambda;
    let shift = lambda * lambda;
    let mut pencil = q.gram().mapv(|g| damping_factor * g);
    for (k, ev) in model.eigenvalues().iter().enumerate() {
        pencil[(k, k)] += c(*ev, 0.0) - shift;
    }
    Ok(pencil)
}

/// Norm of an inverse. An infinite value carries a unit near-kernel vector.
#[derive(Debug, Clone)]
pub struct NormEstimate {
    pub value: f64,
    pub witness: Option<CVector>,
}

impl NormEstimate {
    fn finite(value: f64) -> Self {
        Self { value, witness: None }
    }

    fn singular(witness: CVector) -> Self {
        Self { value: f64::INFINITY, witness: Some(witness) }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `‖Λ^{target} P_λ^{-1} Λ^{-source}‖`.
pub fn pencil_resolvent_norm(
    model: &SpectralModel,
    q: &ObservationOperator,
    lambda: C64,
    source_s: f64,
    target_s: f64,
) -> Result<NormEstimate> {
    let pencil = assemble_pencil(model, q, lambda)?;
    let (smallest, largest) = linalg::singular_extremes(&pencil)?;
    if smallest.value <= SINGULAR_TOL * largest {
        return Ok(NormEstimate::singular(smallest.vector));
    }
    if source_s == 0.0 && target_s == 0.0 {
        return Ok(NormEstimate::finite(1.0 / smallest.value));
    }
    // The inverse of Λ^t P⁻¹ Λ^{-s} is Λ^s P Λ^{-t}.
    let weighted = linalg::scale_cols(
        &linalg::scale_rows(&lambda_power(model, source_s), &pencil),
        &lambda_power(model, -target_s),
    );
    Ok(NormEstimate::finite(1.0 / linalg::smallest_singular_value(&weighted)?))
}

#[derive(Debug, Clone)]
pub struct GeneratorAssembly {
    matrix: CMatrix,
    quotiented: bool,
    model: SpectralModel,
    observation: ObservationOperator,
    position_modes: Vec<usize>,
    lift: Array1<f64>,
    restoring: Array1<f64>,
}

impl GeneratorAssembly {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// True for the energy space with kernel positions removed.
    pub fn quotiented(&self) -> bool {
        self.quotiented
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn position_dim(&self) -> usize {
        self.position_modes.len()
    }

    pub fn model(&self) -> &SpectralModel {
        &self.model
    }

    pub fn observation(&self) -> &ObservationOperator {
        &self.observation
    }

    /// Mode carrying each position coordinate.
    pub fn position_modes(&self) -> &[usize] {
        &self.position_modes
    }

    /// Position weights relative to the raw displacement `u`.
    pub fn position_weights(&self) -> Array1<f64> {
        let freqs = self.model.frequencies();
        self.position_modes
            .iter()
            .map(|&k| if self.quotiented { freqs[k] } else { (1.0 + freqs[k] * freqs[k]).sqrt() })
            .collect()
    }

    /// State vector from displacement and velocity coefficients.
    pub fn state(&self, u: &CVector, v: &CVector) -> Result<CVector> {
        let n = self.model.dim();
        if u.len() != n || v.len() != n {
            return Err(LabError::DimensionMismatch { expected: n, actual: u.len().min(v.len()) });
        }
        let weights = self.position_weights();
        let mut x = CVector::zeros(self.dim());
        for (i, &k) in self.position_modes.iter().enumerate() {
            x[i] = u[k] * weights[i];
        }
        x.slice_mut(s![self.position_dim()..]).assign(v);
        Ok(x)
    }

    /// Velocity block of a state vector.
    pub fn velocity(&self, x: &CVector) -> CVector {
        x.slice(s![self.position_dim()..]).to_owned()
    }
}

pub fn assemble_generator(
    model: &SpectralModel,
    q: &ObservationOperator,
    quotient: bool,
) -> Result<GeneratorAssembly> {
    check_dims(model, q)?;
    let n = model.dim();
    let freqs = model.frequencies();
    let position_modes = if quotient { model.nonkernel_indices() } else { (0..n).collect() };
    let (lift, restoring): (Array1<f64>, Array1<f64>) = if quotient {
        let rho: Array1<f64> = position_modes.iter().map(|&k| freqs[k]).collect();
        (rho.clone(), rho)
    } else {
        let weights: Array1<f64> = freqs.mapv(|f| (1.0 + f * f).sqrt());
        let restoring = freqs.iter().zip(weights.iter()).map(|(f, w)| f * f / w).collect();
        (weights, restoring)
    };
    let na = position_modes.len();
    let mut matrix = CMatrix::zeros((na + n, na + n));
    for (i, &k) in position_modes.iter().enumerate() {
        matrix[(i, na + k)] = c(lift[i], 0.0);
        matrix[(na + k, i)] = c(-restoring[i], 0.0);
    }
    matrix.slice_mut(s![na.., na..]).assign(&q.gram().mapv(|g| -g));
    Ok(GeneratorAssembly {
        matrix,
        quotiented: quotient,
        model: model.clone(),
        observation: q.clone(),
        position_modes,
        lift,
        restoring,
    })
}

/// `(A + z)^{-1}` through the velocity equation `(P - zQ*Q + z²) b = zg + S(restoring ∘ f)`.
struct ShiftedInverse<'a> {
    assembly: &'a GeneratorAssembly,
    pencil: InverseMap,
    shift: C64,
}

impl LinearMap for ShiftedInverse<'_> {
    fn domain_dim(&self) -> usize {
        self.assembly.dim()
    }

    fn codomain_dim(&self) -> usize {
        self.assembly.dim()
    }

    fn apply(&self, x: &CVector) -> Result<CVector> {
        let asm = self.assembly;
        let na = asm.position_dim();
        let z = self.shift;
        let mut rhs = x.slice(s![na..]).mapv(|g| g * z);
        for (i, &k) in asm.position_modes.iter().enumerate() {
            rhs[k] += x[i] * asm.restoring[i];
        }
        let b = self.pencil.solve(&rhs)?;
        let mut out = CVector::zeros(asm.dim());
        for (i, &k) in asm.position_modes.iter().enumerate() {
            out[i] = (x[i] - b[k] * asm.lift[i]) / z;
        }
        out.slice_mut(s![na..]).assign(&b);
        Ok(out)
    }

    fn apply_adjoint(&self, y: &CVector) -> Result<CVector> {
        let asm = self.assembly;
        let na = asm.position_dim();
        let z = self.shift.conj();
        let mut rhs = y.slice(s![na..]).mapv(|g| g * z);
        for (i, &k) in asm.position_modes.iter().enumerate() {
            rhs[k] -= y[i] * asm.lift[i];
        }
        let b = self.pencil.solve_adjoint(&rhs)?;
        let mut out = CVector::zeros(asm.dim());
        for (i, &k) in asm.position_modes.iter().enumerate() {
            out[i] = (y[i] + b[k] * asm.restoring[i]) / z;
        }
        out.slice_mut(s![na..]).assign(&b);
        Ok(out)
    }
}

fn structured_resolvent_norm(assembly: &GeneratorAssembly, lambda: C64) -> Option<NormEstimate> {
    let shift = c(0.0, 1.0) * lambda;
    let pencil = assemble_pencil(&assembly.model, &assembly.observation, lambda).ok()?;
    let map = ShiftedInverse { assembly, pencil: InverseMap::new(&pencil).ok()?, shift };
    let (sigma, left, _) = linalg::top_singular_triplet(&map, LANCZOS_TOL).ok()?;
    let scale = linalg::one_norm(&assembly.matrix) + shift.norm();
    if !sigma.is_finite() || sigma * scale * SINGULAR_TOL >= 1.0 {
        let nrm = linalg::vector_norm(&left);
        return Some(NormEstimate::singular(left.mapv(|z| z / nrm)));
    }
    Some(NormEstimate::finite(sigma))
}

/// `‖(A + iλ)^{-1}‖` in the assembly's Euclidean (energy) norm.
pub fn generator_resolvent_norm(assembly: &GeneratorAssembly, lambda: C64) -> Result<NormEstimate> {
    let shift = c(0.0, 1.0) * lambda;
    if assembly.dim() > DENSE_LIMIT && shift.norm() > 1e-8 {
        if let Some(estimate) = structured_resolvent_norm(assembly, lambda) {
            return Ok(estimate);
        }
    }
    let mut shifted = assembly.matrix.clone();
    for k in 0..shifted.nrows() {
        shifted[(k, k)] += shift;
    }
    let (smallest, largest) = linalg::singular_extremes(&shifted)?;
    if smallest.value <= SINGULAR_TOL * largest {
        return Ok(NormEstimate::singular(smallest.vector));
    }
    Ok(NormEstimate::finite(1.0 / smallest.value))
}

/// Measured sides of the pencil/generator comparison at one real `λ`.
#[derive(Debug, Clone, Serialize)]
pub struct PencilRelations {
    pub lambda: f64,
    pub pencil_norm: f64,
    /// `‖P_λ^{-1}‖_{H → H_{1/2}}`.
    pub pencil_half_norm: f64,
    pub reflected_pencil_norm: f64,
    pub generator_norm: f64,
    pub half_holds: bool,
    pub plain_holds: bool,
    /// `‖R‖ - ‖P_λ^{-1}‖_{H→H_{1/2}}`.
    pub half_slack: f64,
    /// `‖R‖/|λ| - ‖P_λ^{-1}‖`.
    pub plain_slack: f64,
    /// Smallest constant in the `H → H_{1/2}` bound by `⟨λ⟩(⟨λ⟩^{-1} + ‖P_λ^{-1}‖)`.
    pub implied_regularity_constant: f64,
    /// Smallest constant in `‖R‖ ≤ C(|λ|‖P_λ^{-1}‖ + |λ|‖P_{-λ}^{-1}‖ + 1)`.
    pub implied_generator_constant: f64,
}

/// Compares pencil and generator inverses at real `λ`; needs the full assembly.
pub fn verify_pencil_relations(assembly: &GeneratorAssembly, lambda: f64) -> Result<PencilRelations> {
    ensure(!assembly.quotiented, || "pencil relations live on the full energy space".into())?;
    ensure(lambda.abs() >= 1.0, || format!("pencil relations need |λ| ≥ 1, got {lambda}"))?;
    let (model, q) = (&assembly.model, &assembly.observation);
    let at = c(lambda, 0.0);
    let pencil_norm = pencil_resolvent_norm(model, q, at, 0.0, 0.0)?.value;
    let pencil_half_norm = pencil_resolvent_norm(model, q, at, 0.0, 0.5)?.value;
    let reflected_pencil_norm = pencil_resolvent_norm(model, q, -at, 0.0, 0.0)?.value;
    let generator_norm = generator_resolvent_norm(assembly, at)?.value;
    if ![pencil_norm, pencil_half_norm, reflected_pencil_norm, generator_norm].iter().all(|v| v.is_finite()) {
        return Err(LabError::HypothesisViolation(format!("pencil is singular at λ = {lambda}")));
    }
    let modulus = lambda.abs();
    let bracket = (1.0 + lambda * lambda).sqrt();
    let allowance = 1.0 + RELATION_TOL;
    Ok(PencilRelations {
        lambda,
        pencil_norm,
        pencil_half_norm,
        reflected_pencil_norm,
        generator_norm,
        half_holds: pencil_half_norm <= generator_norm * allowance,
        plain_holds: pencil_norm <= generator_norm / modulus * allowance,
        half_slack: generator_norm - pencil_half_norm,
        plain_slack: generator_norm / modulus - pencil_norm,
        implied_regularity_constant: pencil_half_norm / (bracket * (1.0 / bracket + pencil_norm)),
        implied_generator_constant: generator_norm
            / (modulus * pencil_norm + modulus * reflected_pencil_norm + 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Decades of the grid, counted down from its top, used in the fit.
    pub window: f64,
    pub points: usize,
}

/// Least squares of `log value` against `log grid` over the top `window`
/// decades of the grid.
pub fn fit_exponent(grid: &[f64], values: &[f64], window: f64) -> Result<ExponentFit> {
    if grid.len() != values.len() {
        return Err(LabError::DimensionMismatch { expected: grid.len(), actual: values.len() });
    }
    ensure(window > 0.0, || format!("fit window must be positive, got {window}"))?;
    ensure(grid.iter().all(|g| *g > 0.0 && g.is_finite()), || "fit grid must be positive".into())?;
    ensure(values.iter().all(|v| *v > 0.0 && v.is_finite()), || {
        "fit values must be positive and finite".into()
    })?;
    let top = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max).log10();
    let (x, y): (Vec<f64>, Vec<f64>) = grid
        .iter()
        .zip(values)
        .filter(|(g, _)| g.log10() >= top - window - 1e-12)
        .map(|(g, v)| (g.ln(), v.ln()))
        .unzip();
    if x.len() < MIN_FIT_POINTS {
        return Err(LabError::InsufficientData { required: MIN_FIT_POINTS, actual: x.len() });
    }
    let line = fit_line(&x, &y)?;
    Ok(ExponentFit { slope: line.slope, intercept: line.intercept, r2: line.r2, window, points: x.len() })
}

/// Drops grid points within [`RESONANCE_GAP`] of a frequency when there is no
/// damping at all; damped grids are returned unchanged.
pub fn guard_resonances(model: &SpectralModel, q: &ObservationOperator, grid: &[f64]) -> Vec<f64> {
    if linalg::frobenius(q.gram()) > 0.0 {
        return grid.to_vec();
    }
    let freqs = model.frequencies();
    grid.iter()
        .copied()
        .filter(|l| freqs.iter().all(|f| (l.abs() - f).abs() >= RESONANCE_GAP))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolventSweep {
    pub lambda_grid: Vec<f64>,
    /// `‖P_λ^{-1}‖` on `H`.
    pub pencil_norms: Vec<f64>,
    /// `‖(A + iλ)^{-1}‖` in the assembly's norm.
    pub generator_norms: Vec<f64>,
    /// Fit of the generator norms; absent when the window holds too few points.
    pub fit: Option<ExponentFit>,
}

pub fn resolvent_sweep(assembly: &GeneratorAssembly, grid: &[f64], window: f64) -> Result<ResolventSweep> {
    ensure(!grid.is_empty(), || "empty λ grid".into())?;
    ensure(grid.windows(2).all(|w| w[0] < w[1]), || "λ grid must be strictly ascending".into())?;
    for &lambda in grid {
        assembly.model.check_ceiling(lambda)?;
    }
    let rows = grid
        .par_iter()
        .map(|&lambda| {
            let at = c(lambda, 0.0);
            let pencil = pencil_resolvent_norm(&assembly.model, &assembly.observation, at, 0.0, 0.0)?;
            let generator = generator_resolvent_norm(assembly, at)?;
            Ok((pencil.value, generator.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let (pencil_norms, generator_norms): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let fit = if generator_norms.iter().all(|v| v.is_finite()) {
        fit_exponent(grid, &generator_norms, window).ok()
    } else {
        None
    };
    Ok(ResolventSweep { lambda_grid: grid.to_vec(), pencil_norms, generator_norms, fit })
}

#[derive(Debug, Clone, Serialize)]
pub struct RaySweep {
    pub angle: f64,
    pub moduli: Vec<f64>,
    /// `‖P_λ^{-1}‖` at `λ = r e^{iθ}`; infinite where the pencil is singular.
    pub values: Vec<f64>,
    pub singular: Vec<bool>,
    /// Fit over the finite points only.
    pub fit: Option<ExponentFit>,
}

pub fn ray_sweep(
    model: &SpectralModel,
    q: &ObservationOperator,
    angle: f64,
    moduli: &[f64],
    window: f64,
) -> Result<RaySweep> {
    ensure((angle - 1.5 * PI).abs() <= MAX_RAY_OFFSET, || {
        format!("ray angle {angle} is more than {MAX_RAY_OFFSET} from the negative imaginary axis")
    })?;
    ensure(moduli.iter().all(|r| *r > 0.0), || "ray moduli must be positive".into())?;
    let direction = c(angle.cos(), angle.sin());
    let values = moduli
        .par_iter()
        .map(|&r| Ok(pencil_resolvent_norm(model, q, direction * r, 0.0, 0.0)?.value))
        .collect::<Result<Vec<f64>>>()?;
    let singular: Vec<bool> = values.iter().map(|v| !v.is_finite()).collect();
    let (x, y): (Vec<f64>, Vec<f64>) = moduli
        .iter()
        .zip(&values)
        .filter(|(_, v)| v.is_finite())
        .map(|(r, v)| (*r, *v))
        .unzip();
    let fit = fit_exponent(&x, &y, window).ok();
    Ok(RaySweep { angle, moduli: moduli.to_vec(), values, singular, fit })
}

#[derive(Debug, Clone, Serialize)]
pub struct UcpOutcome {
    pub lambda: f64,
    pub sigma_min: f64,
    pub pencil_norm: f64,
    pub passed: bool,
    /// Right singular vector of the smallest singular value.
    #[serde(skip)]
    pub witness: CVector,
}

pub fn ucp_check(model: &SpectralModel, q: &ObservationOperator, lambdas: &[f64]) -> Result<Vec<UcpOutcome>> {
    ensure(!lambdas.is_empty(), || "unique continuation check needs at least one λ".into())?;
    lambdas
        .iter()
        .map(|&lambda| {
            let pencil = assemble_pencil(model, q, c(lambda, 0.0))?;
            let (smallest, largest) = linalg::singular_extremes(&pencil)?;
            Ok(UcpOutcome {
                lambda,
                sigma_min: smallest.value,
                pencil_norm: largest,
                passed: smallest.value > UCP_TOL * largest,
                witness: smallest.vector,
            })
        })
        .collect()
}

fn zero_threshold(assembly: &GeneratorAssembly) -> f64 {
    ZERO_EIGEN_TOL * linalg::one_norm(&assembly.matrix).max(1.0)
}

/// Half the smallest nonzero eigenvalue modulus.
pub fn default_riesz_radius(assembly: &GeneratorAssembly) -> Result<f64> {
    let tol = zero_threshold(assembly);
    let smallest = linalg::eigenvalues(&assembly.matrix)?
        .iter()
        .map(|e| e.norm())
        .filter(|m| *m > tol)
        .fold(f64::INFINITY, f64::min);
    ensure(smallest.is_finite(), || "generator has no nonzero eigenvalue".into())?;
    Ok(0.5 * smallest)
}

/// Spectral projector onto the generalised kernel by trapezoid quadrature of
/// the resolvent on the circle `|z| = radius`.
pub fn riesz_projector(assembly: &GeneratorAssembly, radius: f64) -> Result<CMatrix> {
    ensure(!assembly.quotiented, || "the Riesz projector is taken on the full assembly".into())?;
    ensure(radius > 0.0, || format!("contour radius must be positive, got {radius}"))?;
    let tol = zero_threshold(assembly);
    for e in linalg::eigenvalues(&assembly.matrix)?.iter() {
        let modulus = e.norm();
        if modulus > tol && modulus <= radius * (1.0 + CONTOUR_MARGIN) {
            return Err(LabError::ContourViolation { modulus, radius });
        }
    }
    let n = assembly.dim();
    let id = linalg::identity(n);
    let mut sum = CMatrix::zeros((n, n));
    for j in 0..RIESZ_NODES {
        let phase = 2.0 * PI * (j as f64 + 0.5) / RIESZ_NODES as f64;
        let z = c(phase.cos(), phase.sin()) * radius;
        let shifted = id.mapv(|d| d * z) - &assembly.matrix;
        let resolvent = linalg::solve_matrix(&shifted, &id)?;
        sum.scaled_add(z, &resolvent);
    }
    Ok(sum.mapv(|v| v / RIESZ_NODES as f64))
}

/// Oblique projector `K (L^H K)^{-1} L^H` with `K`, `L` bases of the
/// generalised kernels of `A` and `A^H` (chains of length two at most).
///
/// Both come from one SVD `A = U Σ V^H`: the kernels are the null singular
/// vectors, and a kernel vector `y` heads a chain exactly when it lies in the
/// range of `A`, in which case `A^+ y` is the next link. Working with `A`
/// rather than `A²` keeps the accuracy at `ε‖A‖` instead of `ε‖A‖²`.
pub fn kernel_projector(assembly: &GeneratorAssembly) -> Result<CMatrix> {
    let a = &assembly.matrix;
    let n = a.nrows();
    let (u, sv, vt) = a.svddc(JobSvd::All)?;
    let (u, vt) = match (u, vt) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(LabError::Numeric("missing singular vectors".into())),
    };
    let top = sv[0];
    let rank = sv.iter().filter(|&&s| s > KERNEL_TOL * top).count();
    if rank == n {
        return Ok(CMatrix::zeros((n, n)));
    }
    let v = linalg::adjoint(&vt);
    let (v_range, v_null) = (v.slice(s![.., ..rank]).to_owned(), v.slice(s![.., rank..]).to_owned());
    let (u_range, u_null) = (u.slice(s![.., ..rank]).to_owned(), u.slice(s![.., rank..]).to_owned());
    let inverse_sv = sv.slice(s![..rank]).mapv(|s| 1.0 / s);
    // A^+ = V_r Σ_r^{-1} U_r^H and (A^H)^+ = U_r Σ_r^{-1} V_r^H.
    let chains = |heads: &CMatrix, obstruction: &CMatrix, image: &CMatrix, preimage: &CMatrix| -> Result<CMatrix> {
        let coefficients = absolute_null_space(&linalg::adjoint(obstruction).dot(heads))?;
        let starts = heads.dot(&coefficients);
        Ok(linalg::scale_cols(image, &inverse_sv).dot(&linalg::adjoint(preimage).dot(&starts)))
    };
    let right_chain = chains(&v_null, &u_null, &v_range, &u_range)?;
    let left_chain = chains(&u_null, &v_null, &u_range, &v_range)?;
    let right = ndarray::concatenate(ndarray::Axis(1), &[v_null.view(), right_chain.view()])
        .map_err(|e| LabError::Numeric(e.to_string()))?;
    let left = ndarray::concatenate(ndarray::Axis(1), &[u_null.view(), left_chain.view()])
        .map_err(|e| LabError::Numeric(e.to_string()))?;
    if right.ncols() != left.ncols() {
        return Err(LabError::Numeric(format!(
            "generalised kernels of A and its adjoint differ in dimension ({} vs {})",
            right.ncols(),
            left.ncols()
        )));
    }
    debug_assert_eq!(right.nrows(), n);
    let left_h = linalg::adjoint(&left);
    let coupling = linalg::inverse(&left_h.dot(&right))?;
    Ok(right.dot(&coupling).dot(&left_h))
}

/// Null space of a small square matrix of overlaps between unit vectors.
fn absolute_null_space(m: &CMatrix) -> Result<CMatrix> {
    let (_, sv, vt) = m.svddc(JobSvd::All)?;
    let vt = vt.ok_or_else(|| LabError::Numeric("missing singular vectors".into()))?;
    let rank = sv.iter().filter(|&&s| s > CHAIN_TOL).count();
    Ok(linalg::adjoint(&vt.slice(s![rank.., ..]).to_owned()))
}
