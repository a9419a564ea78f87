//! Fourier coefficients `(1/2pi) ∫ W(x) e^{-inx} dx` of damping profiles on the
//! circle, by composite Gauss-Legendre panels. Panels are at most half a period
//! of the highest harmonic wide; singular endpoints get geometric grading.

use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use ndarray::Array1;

use crate::error::{LabError, Result};
use crate::linalg::{c, CVector};

/// Agreement demanded between the two quadrature resolutions.
pub const RESOLUTION_TOL: f64 = 1e-8;
const GRADING_RATIO: f64 = 0.15;
const SMALLEST_GRADED_PANEL: f64 = 1e-15;
// Resolves the flat ends of bump profiles on short intervals.
const MIN_PANELS: usize = 32;

/// One integration interval `[start, end]` with an integrand of the form
/// `profile(x - start)` and an optional integrable singularity at `start`
/// behaving like `(x - start)^{-exponent}`.
pub(crate) struct Segment<'a> {
    pub start: f64,
    pub end: f64,
    pub singular_exponent: Option<f64>,
    pub profile: &'a dyn Fn(f64) -> f64,
}

fn nodes(order: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(NonZeroUsize::new(order).expect("positive order"))
        .as_node_weight_pairs()
        .to_vec()
}

/// Panel endpoints on `[0, length]` (offsets from the segment start).
fn panels(length: f64, max_harmonic: usize, refine: usize, graded: bool) -> Vec<(f64, f64)> {
    let count = ((length * max_harmonic as f64 / PI).ceil() as usize).max(MIN_PANELS) * refine;
    let width = length / count as f64;
    let mut out = Vec::with_capacity(count + 64);
    let first = if graded {
        let mut right = width;
        while right > SMALLEST_GRADED_PANEL {
            let left = right * GRADING_RATIO;
            out.push((left, right));
            right = left;
        }
        1
    } else {
        0
    };
    for p in first..count {
        out.push((p as f64 * width, ((p + 1) as f64 * width).min(length)));
    }
    out
}

fn integrate_segment(
    segment: &Segment<'_>,
    max_harmonic: usize,
    order: usize,
    refine: usize,
) -> Result<CVector> {
    let length = segment.end - segment.start;
    let rule = nodes(order);
    let graded = segment.singular_exponent.is_some();
    let mut acc = vec![c(0.0, 0.0); max_harmonic + 1];
    let mut add_node = |x: f64, weight: f64| {
        let step = c((-(segment.start + x)).cos(), (-(segment.start + x)).sin());
        let mut phase = c(1.0, 0.0);
        for slot in acc.iter_mut() {
            *slot += phase * weight;
            phase *= step;
        }
    };
    for (left, right) in panels(length, max_harmonic, refine, graded) {
        let half = 0.5 * (right - left);
        let mid = 0.5 * (right + left);
        for &(t, w) in &rule {
            let x = mid + half * t;
            let value = (segment.profile)(x);
            if !value.is_finite() || value < 0.0 {
                return Err(LabError::InvalidArgument(format!(
                    "damping profile is negative or non-finite at x = {}",
                    segment.start + x
                )));
            }
            add_node(x, w * half * value);
        }
    }
    if let Some(beta) = segment.singular_exponent {
        // Innermost graded cell [0, delta]: the profile is delta-local, so the
        // singular factor integrates in closed form.
        let delta = SMALLEST_GRADED_PANEL;
        let coefficient = (segment.profile)(delta) * delta.powf(beta);
        add_node(0.0, coefficient * delta.powf(1.0 - beta) / (1.0 - beta));
    }
    Ok(Array1::from(acc).mapv(|z| z / (2.0 * PI)))
}

/// Coefficients for harmonics `0..=max_harmonic` of the sum of the segments,
/// accepted when two quadrature resolutions agree to [`RESOLUTION_TOL`].
pub(crate) fn segment_coefficients(segments: &[Segment<'_>], max_harmonic: usize) -> Result<CVector> {
    let mut coarse = CVector::zeros(max_harmonic + 1);
    let mut fine = CVector::zeros(max_harmonic + 1);
    for segment in segments {
        coarse = coarse + integrate_segment(segment, max_harmonic, 20, 1)?;
        fine = fine + integrate_segment(segment, max_harmonic, 24, 2)?;
    }
    let scale = fine[0].norm().max(1.0);
    let discrepancy = coarse
        .iter()
        .zip(fine.iter())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()))
        / scale;
    if discrepancy > RESOLUTION_TOL {
        return Err(LabError::QuadratureDivergence { discrepancy });
    }
    Ok(fine)
}

/// Coefficients from uniform periodic samples on `[0, 2pi)` by the trapezoid
/// rule (exact for band-limited data below the Nyquist harmonic).
pub(crate) fn sample_coefficients(samples: &[f64], max_harmonic: usize) -> Result<CVector> {
    let count = samples.len();
    if count <= 2 * max_harmonic {
        return Err(LabError::InsufficientData { required: 2 * max_harmonic + 1, actual: count });
    }
    if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(LabError::InvalidArgument("damping samples must be finite and nonnegative".into()));
    }
    let mut acc = vec![c(0.0, 0.0); max_harmonic + 1];
    for (j, &value) in samples.iter().enumerate() {
        let x = 2.0 * PI * j as f64 / count as f64;
        let step = c(x.cos(), -x.sin());
        let mut phase = c(1.0, 0.0);
        for slot in acc.iter_mut() {
            *slot += phase * value;
            phase *= step;
        }
    }
    Ok(Array1::from(acc).mapv(|z| z / count as f64))
}
