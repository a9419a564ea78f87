//! Ordinary least-squares lines, the common kernel of every exponent and
//! decay-law fit.

use serde::Serialize;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination; 1 when the data are exactly collinear.
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(LabError::DimensionMismatch { expected: x.len(), actual: y.len() });
    }
    if x.len() < 2 {
        return Err(LabError::InsufficientData { required: 2, actual: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(LabError::InvalidArgument("regression data must be finite".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(LabError::InvalidArgument("regression abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = if ss_tot <= f64::EPSILON * f64::EPSILON * n * my * my {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LineFit { slope, intercept, r2 })
}

/// `points` values from `min` to `max` inclusive, equally spaced in log scale.
pub fn log_spaced(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max > min && max.is_finite()) {
        return Err(LabError::InvalidArgument(format!("log grid needs 0 < min < max, got [{min}, {max}]")));
    }
    if points < 2 {
        return Err(LabError::InsufficientData { required: 2, actual: points });
    }
    let (lo, hi) = (min.ln(), max.ln());
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|k| match k {
            0 => min,
            k if k == points - 1 => max,
            k => (lo + (hi - lo) * k as f64 / last).exp(),
        })
        .collect())
}

/// `points` values from `min` to `max` inclusive, equally spaced.
pub fn linear_spaced(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !(max > min && min.is_finite() && max.is_finite()) {
        return Err(LabError::InvalidArgument(format!("linear grid needs min < max, got [{min}, {max}]")));
    }
    if points < 2 {
        return Err(LabError::InsufficientData { required: 2, actual: points });
    }
    let last = (points - 1) as f64;
    Ok((0..points).map(|k| if k == points - 1 { max } else { min + (max - min) * k as f64 / last }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let fit = fit_line(&x, &y).unwrap();
        assert!((fit.slope - 2.5).abs() < 1e-14);
        assert!((fit.intercept + 1.0).abs() < 1e-14);
        assert!((fit.r2 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(fit_line(&[1.0], &[0.0]).is_err());
        assert!(fit_line(&[1.0, 2.0], &[0.0, f64::NAN]).is_err());
    }
}
