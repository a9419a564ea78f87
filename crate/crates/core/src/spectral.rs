//! Truncated diagonal model of a nonnegative self-adjoint propagator, its
//! functional calculus and Sobolev scale.
//!
//! Everything is stored in the eigenbasis of the propagator, so inner products
//! are Euclidean and every calculus operator is a vector of multipliers.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, LabError, Result};
use crate::linalg::{c, CVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Geometry {
    Circle,
    Abstract,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub index: usize,
    /// Square root of the eigenvalue.
    pub frequency: f64,
    /// Signed Fourier wavenumber on the circle; ordinal for abstract models.
    pub label: i64,
}

/// Sorted, immutable spectral data. For a power model `P^alpha` built from a
/// base model the frequencies are `base^alpha` and labels are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    modes: Vec<Mode>,
    geometry: Geometry,
    cutoff: Option<usize>,
    exponent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub geometry: Geometry,
    pub cutoff: Option<usize>,
    pub dim: usize,
    pub exponent: f64,
    pub frequencies: Vec<f64>,
}

/// Fourier model of the Laplacian on the circle of circumference `2 pi`.
pub fn build_circle_model(cutoff: usize) -> Result<SpectralModel> {
    ensure(cutoff >= 1, || format!("circle cutoff must be at least 1, got {cutoff}"))?;
    let mut modes = Vec::with_capacity(2 * cutoff + 1);
    modes.push(Mode { index: 0, frequency: 0.0, label: 0 });
    for k in 1..=cutoff as i64 {
        for label in [-k, k] {
            modes.push(Mode { index: modes.len(), frequency: k as f64, label });
        }
    }
    Ok(SpectralModel { modes, geometry: Geometry::Circle, cutoff: Some(cutoff), exponent: 1.0 })
}

impl SpectralModel {
    /// Abstract model from arbitrary nonnegative frequencies; sorted stably.
    pub fn from_frequencies(frequencies: &[f64]) -> Result<Self> {
        ensure(frequencies.len() >= 2, || "a model needs at least two modes".into())?;
        ensure(frequencies.iter().all(|f| f.is_finite() && *f >= 0.0), || {
            "frequencies must be finite and nonnegative".into()
        })?;
        let mut order: Vec<usize> = (0..frequencies.len()).collect();
        order.sort_by(|&a, &b| frequencies[a].total_cmp(&frequencies[b]));
        let modes = order
            .iter()
            .enumerate()
            .map(|(index, &k)| Mode { index, frequency: frequencies[k], label: k as i64 })
            .collect();
        Ok(Self { modes, geometry: Geometry::Abstract, cutoff: None, exponent: 1.0 })
    }

    /// Model of `P^alpha`: frequencies raised to `alpha`, labels and order kept.
    pub fn power(&self, alpha: f64) -> Result<Self> {
        ensure(alpha > 0.0 && alpha.is_finite(), || format!("power must be positive, got {alpha}"))?;
        let modes = self
            .modes
            .iter()
            .map(|m| Mode { frequency: m.frequency.powf(alpha), ..*m })
            .collect();
        Ok(Self { modes, geometry: self.geometry, cutoff: self.cutoff, exponent: self.exponent * alpha })
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn cutoff(&self) -> Option<usize> {
        self.cutoff
    }

    /// Power relating this model to its base Laplacian-type model.
    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn frequencies(&self) -> Array1<f64> {
        self.modes.iter().map(|m| m.frequency).collect()
    }

    /// Eigenvalues of `P`, i.e. squared frequencies.
    pub fn eigenvalues(&self) -> Array1<f64> {
        self.modes.iter().map(|m| m.frequency * m.frequency).collect()
    }

    /// Frequencies of the base model this one was raised from.
    pub fn base_frequencies(&self) -> Array1<f64> {
        let inv = 1.0 / self.exponent;
        self.modes.iter().map(|m| m.frequency.powf(inv)).collect()
    }

    pub fn labels(&self) -> Vec<i64> {
        self.modes.iter().map(|m| m.label).collect()
    }

    pub fn kernel_dim(&self) -> usize {
        self.modes.iter().filter(|m| m.frequency == 0.0).count()
    }

    pub fn kernel_indices(&self) -> Vec<usize> {
        self.modes.iter().filter(|m| m.frequency == 0.0).map(|m| m.index).collect()
    }

    pub fn nonkernel_indices(&self) -> Vec<usize> {
        self.modes.iter().filter(|m| m.frequency > 0.0).map(|m| m.index).collect()
    }

    pub fn max_frequency(&self) -> f64 {
        self.modes.last().map(|m| m.frequency).unwrap_or(0.0)
    }

    /// Largest admissible spectral parameter: a quarter of the base frequency
    /// range, mapped back through the power.
    pub fn truncation_ceiling(&self) -> f64 {
        let base_max = self.max_frequency().powf(1.0 / self.exponent);
        (base_max / 4.0).powf(self.exponent)
    }

    pub fn check_ceiling(&self, lambda: f64) -> Result<()> {
        let ceiling = self.truncation_ceiling();
        if lambda.abs() > ceiling * (1.0 + 1e-12) {
            return Err(LabError::OutsideTruncation { requested: lambda.abs(), ceiling });
        }
        Ok(())
    }

    pub fn descriptor(&self) -> ModelDescriptor {
        ModelDescriptor {
            geometry: self.geometry,
            cutoff: self.cutoff,
            dim: self.dim(),
            exponent: self.exponent,
            frequencies: self.frequencies().to_vec(),
        }
    }

    pub fn basis_vector(&self, index: usize) -> CVector {
        let mut e = CVector::zeros(self.dim());
        e[index] = c(1.0, 0.0);
        e
    }

    /// Index of the mode with the given label, if present.
    pub fn index_of_label(&self, label: i64) -> Option<usize> {
        self.modes.iter().position(|m| m.label == label)
    }
}

/// Coefficients in the eigenbasis of a model.
#[derive(Debug, Clone)]
pub struct SobolevVector<'m> {
    model: &'m SpectralModel,
    coeffs: CVector,
}

impl<'m> SobolevVector<'m> {
    pub fn new(model: &'m SpectralModel, coeffs: CVector) -> Result<Self> {
        if coeffs.len() != model.dim() {
            return Err(LabError::DimensionMismatch { expected: model.dim(), actual: coeffs.len() });
        }
        Ok(Self { model, coeffs })
    }

    pub fn model(&self) -> &'m SpectralModel {
        self.model
    }

    pub fn coeffs(&self) -> &CVector {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> CVector {
        self.coeffs
    }

    pub fn norm(&self, s: f64) -> f64 {
        sobolev_norm(self.model, s, &self.coeffs)
    }
}

/// Multipliers `f(rho_k^2)`; a non-finite value names the offending mode.
pub fn calculus_multiplier(model: &SpectralModel, f: impl Fn(f64) -> f64) -> Result<Array1<f64>> {
    model
        .modes
        .iter()
        .map(|m| {
            let value = f(m.frequency * m.frequency);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(LabError::NonFiniteOnMode { mode: m.index, frequency: m.frequency })
            }
        })
        .collect()
}

pub fn apply_calculus<'m>(
    model: &'m SpectralModel,
    f: impl Fn(f64) -> f64,
    u: &SobolevVector<'m>,
) -> Result<SobolevVector<'m>> {
    let multiplier = calculus_multiplier(model, f)?;
    let coeffs = u.coeffs.iter().zip(multiplier.iter()).map(|(z, w)| z * *w).collect();
    SobolevVector::new(model, coeffs)
}

/// `(1 + rho_k^2)^s`.
pub fn lambda_power(model: &SpectralModel, s: f64) -> Array1<f64> {
    model.modes.iter().map(|m| (1.0 + m.frequency * m.frequency).powf(s)).collect()
}

/// `(1 + rho_k^{2 alpha})^s`.
pub fn lambda_alpha_power(model: &SpectralModel, alpha: f64, s: f64) -> Result<Array1<f64>> {
    ensure(alpha > 0.0, || format!("alpha must be positive, got {alpha}"))?;
    Ok(model.modes.iter().map(|m| (1.0 + m.frequency.powf(2.0 * alpha)).powf(s)).collect())
}

pub fn sobolev_norm(model: &SpectralModel, s: f64, u: &CVector) -> f64 {
    model
        .modes
        .iter()
        .zip(u.iter())
        .map(|(m, z)| (1.0 + m.frequency * m.frequency).powf(2.0 * s) * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// 0/1 multiplier selecting modes with frequency in `[lower, upper]`.
pub fn spectral_projector(model: &SpectralModel, lower: f64, upper: f64) -> Result<Array1<f64>> {
    ensure(lower <= upper, || format!("empty interval [{lower}, {upper}]"))?;
    Ok(model
        .modes
        .iter()
        .map(|m| if m.frequency >= lower && m.frequency <= upper { 1.0 } else { 0.0 })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationReport {
    pub holds: bool,
    /// Right-hand side minus left-hand side.
    pub slack: f64,
}

/// `‖u‖_r ≤ a ‖u‖_t + a^{(s-r)/(t-r)} ‖u‖_s` for `s < r < t`, `a > 0`.
pub fn interpolation_check(
    model: &SpectralModel,
    (s, r, t): (f64, f64, f64),
    weight: f64,
    u: &CVector,
) -> Result<InterpolationReport> {
    ensure(s < r && r < t, || format!("need s < r < t, got ({s}, {r}, {t})"))?;
    ensure(weight > 0.0, || format!("weight must be positive, got {weight}"))?;
    let lhs = sobolev_norm(model, r, u);
    let rhs = weight * sobolev_norm(model, t, u)
        + weight.powf((s - r) / (t - r)) * sobolev_norm(model, s, u);
    // Rounding in the three norms is far below this margin.
    let holds = lhs <= rhs * (1.0 + 1e-13);
    Ok(InterpolationReport { holds, slack: rhs - lhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn smallest_circle_model() {
        let model = build_circle_model(1).unwrap();
        let pairs: Vec<(i64, f64)> = model.modes().iter().map(|m| (m.label, m.frequency)).collect();
        assert_eq!(pairs, vec![(0, 0.0), (-1, 1.0), (1, 1.0)]);
        assert_eq!(model.dim(), 3);
        assert_eq!(model.kernel_dim(), 1);
    }

    #[test]
    fn circle_enumeration() {
        let model = build_circle_model(2).unwrap();
        assert_eq!(model.frequencies().to_vec(), vec![0.0, 1.0, 1.0, 2.0, 2.0]);
        let big = build_circle_model(64).unwrap();
        assert_eq!(big.dim(), 129);
        assert_eq!(big.max_frequency(), 64.0);
        assert!(build_circle_model(0).is_err());
    }

    #[test]
    fn calculus_on_basis_vector() {
        let model = build_circle_model(4).unwrap();
        let k = model.index_of_label(3).unwrap();
        let u = SobolevVector::new(&model, model.basis_vector(k)).unwrap();
        let out = apply_calculus(&model, |x| x, &u).unwrap();
        assert_eq!(out.coeffs()[k], c(9.0, 0.0));
    }

    #[test]
    fn half_power_gives_lambda_squared_on_witness_modes() {
        // |D| on e^{i n x} with n = lambda^2 returns lambda^2.
        let model = build_circle_model(32).unwrap();
        for lambda in [2.0f64, 3.0, 5.0] {
            let n = (lambda * lambda) as i64;
            let k = model.index_of_label(n).unwrap();
            let u = SobolevVector::new(&model, model.basis_vector(k)).unwrap();
            let out = apply_calculus(&model, |x| x.sqrt(), &u).unwrap();
            assert!((out.coeffs()[k].re - lambda * lambda).abs() < 1e-12);
        }
    }

    #[test]
    fn calculus_reports_offending_mode() {
        let model = build_circle_model(2).unwrap();
        let u = SobolevVector::new(&model, model.basis_vector(0)).unwrap();
        match apply_calculus(&model, |x| 1.0 / x, &u) {
            Err(LabError::NonFiniteOnMode { mode: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lambda_power_formula_and_cross_path() {
        let model = build_circle_model(8).unwrap();
        assert!(lambda_power(&model, 0.0).iter().all(|&v| v == 1.0));
        let half = lambda_power(&model, 0.5);
        assert_eq!(half[0], 1.0);
        assert!((half[1] - 2f64.sqrt()).abs() < 1e-15);
        let quarter = lambda_power(&model, -0.25);
        let via_calculus = calculus_multiplier(&model, |t| (1.0 + t).powf(-0.25)).unwrap();
        for (a, b) in quarter.iter().zip(via_calculus.iter()) {
            assert!((a - b).abs() <= 1e-15 * b);
        }
    }

    #[test]
    fn lambda_alpha_power_cases() {
        let model = build_circle_model(8).unwrap();
        for s in [-1.0, 0.3, 2.0] {
            assert_eq!(lambda_alpha_power(&model, 1.0, s).unwrap(), lambda_power(&model, s));
        }
        let m = lambda_alpha_power(&model, 0.5, 1.0).unwrap();
        assert_eq!(m[model.index_of_label(4).unwrap()], 5.0);
        assert!(lambda_alpha_power(&model, 0.0, 1.0).is_err());
    }

    #[test]
    fn norm_equivalence_constants_are_finite() {
        let model = build_circle_model(128).unwrap();
        for alpha in [0.5, 2.0] {
            let scaled = lambda_alpha_power(&model, alpha, 1.0 / alpha).unwrap();
            let plain = lambda_power(&model, 1.0);
            let ratios: Vec<f64> = plain.iter().zip(scaled.iter()).map(|(p, q)| p / q).collect();
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            // Ratio is 2^{1 - 1/alpha}-bounded at rho = 1 and tends to 1.
            let bound = 2f64.powf((1.0 - 1.0 / alpha).abs());
            assert!(hi <= bound + 1e-12 && 1.0 / lo <= bound + 1e-12);
        }
    }

    #[test]
    fn projector_cases() {
        let model = build_circle_model(4).unwrap();
        assert!(spectral_projector(&model, 0.0, f64::INFINITY).unwrap().iter().all(|&v| v == 1.0));
        let window = spectral_projector(&model, 0.5, 1.5).unwrap();
        assert_eq!(window.sum(), 2.0);
        assert_eq!(window[1] + window[2], 2.0);
        assert!(spectral_projector(&model, 2.0, 1.0).is_err());
        let big = build_circle_model(64).unwrap();
        let (h, eps, m) = (0.1, 0.25, 0.2);
        let pi_h = spectral_projector(&big, 1.0 / h - eps / m, 1.0 / h + eps / m).unwrap();
        let expected = big.frequencies().iter().filter(|&&r| (r - 10.0).abs() <= eps / m).count();
        assert_eq!(pi_h.sum() as usize, expected);
    }

    #[test]
    fn sobolev_norm_cases() {
        let model = build_circle_model(5).unwrap();
        assert_eq!(sobolev_norm(&model, 1.3, &CVector::zeros(model.dim())), 0.0);
        let k = model.index_of_label(-3).unwrap();
        assert!((sobolev_norm(&model, 0.7, &model.basis_vector(k)) - 10f64.powf(0.7)).abs() < 1e-12);
    }

    #[test]
    fn interpolation_single_mode_and_ordering() {
        let model = build_circle_model(6).unwrap();
        let e = model.basis_vector(model.index_of_label(5).unwrap());
        let report = interpolation_check(&model, (0.0, 0.5, 1.0), 0.3, &e).unwrap();
        assert!(report.holds && report.slack >= 0.0);
        let huge = interpolation_check(&model, (0.0, 0.5, 1.0), 1e9, &e).unwrap();
        assert!(huge.holds);
        assert!(interpolation_check(&model, (1.0, 0.5, 0.0), 1.0, &e).is_err());
    }

    #[test]
    fn descriptor_round_trip_fields() {
        let model = build_circle_model(3).unwrap();
        let d = model.descriptor();
        assert_eq!(d.dim, 7);
        assert_eq!(d.cutoff, Some(3));
        assert_eq!(d.frequencies.len(), 7);
    }

    #[test]
    fn power_model_ceiling_uses_base_frequencies() {
        let base = build_circle_model(64).unwrap();
        assert_eq!(base.truncation_ceiling(), 16.0);
        let plate = base.power(2.0).unwrap();
        assert!((plate.truncation_ceiling() - 256.0).abs() < 1e-9);
        let half = base.power(0.5).unwrap();
        assert!((half.truncation_ceiling() - 4.0).abs() < 1e-12);
        assert!(half.check_ceiling(4.5).is_err());
    }

    fn random_vector(dim: usize, seed: &[f64]) -> CVector {
        (0..dim).map(|k| c(seed[k % seed.len()] * (k as f64 + 1.0).sin(), seed[(k + 1) % seed.len()])).collect()
    }

    proptest! {
        #[test]
        fn lambda_powers_invert(s in -3.0f64..3.0, seed in prop::collection::vec(-1.0f64..1.0, 4)) {
            let model = build_circle_model(20).unwrap();
            let u = random_vector(model.dim(), &seed);
            let fwd = lambda_power(&model, s);
            let back = lambda_power(&model, -s);
            for (k, z) in u.iter().enumerate() {
                let w = z * fwd[k] * back[k];
                prop_assert!((w - z).norm() <= 1e-13 * z.norm().max(1e-300));
            }
        }

        #[test]
        fn projector_idempotent_and_commutes(a in 0.0f64..10.0, width in 0.0f64..10.0, p in 0.1f64..3.0) {
            let model = build_circle_model(12).unwrap();
            let proj = spectral_projector(&model, a, a + width).unwrap();
            prop_assert_eq!(&proj * &proj, proj.clone());
            let f = calculus_multiplier(&model, |x| (1.0 + x).powf(p)).unwrap();
            prop_assert_eq!(&proj * &f, &f * &proj);
        }

        #[test]
        fn interpolation_holds(s in -2.0f64..1.0, gap1 in 0.01f64..2.0, gap2 in 0.01f64..2.0,
                               log_weight in -6.0f64..6.0, seed in prop::collection::vec(-1.0f64..1.0, 5)) {
            let model = build_circle_model(32).unwrap();
            let u = random_vector(model.dim(), &seed);
            let (r, t) = (s + gap1, s + gap1 + gap2);
            let report = interpolation_check(&model, (s, r, t), 10f64.powf(log_weight), &u).unwrap();
            prop_assert!(report.holds, "slack {}", report.slack);
        }

        #[test]
        fn power_then_root_recovers_eigenvalues(alpha in 0.2f64..3.0) {
            let model = build_circle_model(16).unwrap();
            let up = calculus_multiplier(&model, |x| x.powf(alpha)).unwrap();
            let root: Vec<f64> = up.iter().map(|v| v.powf(1.0 / alpha)).collect();
            for (ev, r) in model.eigenvalues().iter().zip(root) {
                if *ev > 0.0 {
                    prop_assert!((r - ev).abs() <= 1e-12 * ev);
                }
            }
        }

        #[test]
        fn half_norm_cauchy_schwarz(seed in prop::collection::vec(-1.0f64..1.0, 6)) {
            let model = build_circle_model(16).unwrap();
            let u = random_vector(model.dim(), &seed);
            let n0 = sobolev_norm(&model, 0.0, &u);
            let n1 = sobolev_norm(&model, 1.0, &u);
            let nh = sobolev_norm(&model, 0.5, &u);
            prop_assert!(nh * nh <= n0 * n1 * (1.0 + 1e-13));
        }
    }
}
