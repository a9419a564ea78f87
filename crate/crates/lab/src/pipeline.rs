//! Building blocks shared by the subcommands and the scenarios.

use dampspec::control::control_profile;
use dampspec::damping::{compose_fractional, structural_observation, superposed_observation, ObservationOperator};
use dampspec::dilation::{dilate_general, verify_dilation, CalculusFunction};
use dampspec::evolution::{decay_curve, dissipation_check, spectral_gap};
use dampspec::linalg;
use dampspec::resolvent::{assemble_generator, resolvent_sweep, ResolventSweep};
use dampspec::spectral::SpectralModel;
use dampspec::LabError;

use crate::config::{CalculusFamily, ExperimentConfig, PropagatorSpec};
use crate::error::RunError;
use crate::report::{Provenance, ScenarioReport, Table};

/// Smallest time at which the dissipation identity is sampled.
const DISSIPATION_START: f64 = 0.01;

pub fn new_report(config: &ExperimentConfig, name: &str, anchor: &str) -> Result<ScenarioReport, RunError> {
    Ok(ScenarioReport::new(name, anchor, Provenance::new(config.hash()?, config.seed)))
}

/// The configured damping on `model`: a structural pair, or the superposed
/// profiles, then composed with `|D|^s` when requested.
pub fn observation(config: &ExperimentConfig, model: &SpectralModel) -> Result<ObservationOperator, RunError> {
    let q = match &config.damping.structural {
        Some(pair) => structural_observation(model, &pair.viscous, &pair.elastic)?,
        None => superposed_observation(model, &config.damping.profiles, "configured damping")?,
    };
    match config.damping.fractional {
        Some(s) => Ok(compose_fractional(&q, model, s)?),
        None => Ok(q),
    }
}

pub fn sweep_table(sweep: &ResolventSweep) -> Table {
    Table::from_columns(
        "sweep",
        &[
            ("lambda", &sweep.lambda_grid),
            ("pencil_norm", &sweep.pencil_norms),
            ("generator_norm", &sweep.generator_norms),
        ],
    )
}

pub fn calculus_function(family: CalculusFamily) -> Result<CalculusFunction, RunError> {
    let (alpha, k) = (family.alpha(), family.growth_constant());
    let f = match family {
        CalculusFamily::Quadratic => CalculusFunction::new(
            "s + s^2",
            |s: f64| s + s * s,
            |y: f64| 0.5 * ((1.0 + 4.0 * y).sqrt() - 1.0),
            k,
            alpha,
            1.0,
        )?,
        CalculusFamily::LogCorrected => {
            CalculusFunction::with_bisection_inverse("s (1 + log(1 + s))", |s: f64| s * (1.0 + s.ln_1p()), k, alpha, 1.0)?
        }
    };
    Ok(f)
}

/// Mode table of the configured model.
pub fn model_report(config: &ExperimentConfig) -> Result<ScenarioReport, RunError> {
    let model = config.model()?;
    let mut report = new_report(config, "model", "spectral model of the configured propagator")?;
    let labels: Vec<f64> = model.labels().iter().map(|&l| l as f64).collect();
    report.check("truncation-ceiling", true, config.ceiling(), config.ceiling(), "largest admissible λ");
    report.table(Table::from_columns(
        "modes",
        &[
            ("label", &labels),
            ("frequency", &model.frequencies().to_vec()),
            ("eigenvalue", &model.eigenvalues().to_vec()),
        ],
    ));
    Ok(report)
}

/// Pencil and generator resolvent norms along the `λ` grid.
pub fn sweep_report(config: &ExperimentConfig) -> Result<ScenarioReport, RunError> {
    let model = config.model()?;
    let q = observation(config, &model)?;
    let grid = config.lambda_values()?;
    let sweep = resolvent_sweep(&assemble_generator(&model, &q, false)?, &grid, config.tolerances.fit_window)?;
    let mut report = new_report(config, "sweep", "resolvent norms of the damped wave generator")?;
    let finite = sweep.generator_norms.iter().all(|v| v.is_finite());
    report.check("finite-resolvent", finite, grid.len() as f64, 0.0, "generator invertible along the grid");
    if let Some(fit) = &sweep.fit {
        report.fit("finite-resolvent", fit);
    }
    report.table(sweep_table(&sweep));
    Ok(report)
}

/// Control constants `K(λ)` with the configured weights.
pub fn control_report(config: &ExperimentConfig) -> Result<ScenarioReport, RunError> {
    let model = config.model()?;
    let q = observation(config, &model)?;
    let grid = config.lambda_values()?;
    let profile = control_profile(&model, &q, &grid, config.weights.mu, config.weights.gamma)?;
    let mut report = new_report(config, "control", "weighted control constants of the pencil")?;
    report.check(
        "weights-in-range",
        profile.within_theorem_range,
        config.weights.mu,
        0.5 + config.weights.gamma,
        "μ ≤ 1/2 + γ keeps the converse direction available",
    );
    if let Some(fit) = &profile.fit {
        report.fit("weights-in-range", fit);
    }
    report.table(Table::from_columns(
        "control",
        &[
            ("lambda", &profile.lambda_grid),
            ("k_value", &profile.k_values),
            ("pencil_weight", &profile.pencil_weight),
            ("observation_weight", &profile.observation_weight),
        ],
    ));
    Ok(report)
}

/// Dilation of the base-model profile to the configured propagator. Power
/// propagators are also measured directly and compared.
pub fn dilate_report(config: &ExperimentConfig) -> Result<ScenarioReport, RunError> {
    let base = config.base_model()?;
    let q = observation(config, &base)?;
    let grid = config.lambda_values()?;
    let (mu, gamma) = (config.weights.mu, config.weights.gamma);
    let mut report = new_report(config, "dilate", "control estimates transported from P to f(P)")?;
    match &config.propagator {
        PropagatorSpec::Power { alpha } => {
            let result = verify_dilation(&base, &q, *alpha, mu, gamma, &grid)?;
            report.check(
                "dilation-upper-bound",
                result.passed(),
                result.comparison.violations as f64,
                0.0,
                format!("calibration {:.6e}", result.comparison.calibration),
            );
            report.check(
                "dilation-uncalibrated",
                result.uncalibrated_dominates,
                result.comparison.calibration,
                1.0,
                "prediction with constant 1 dominates",
            );
            if let Some(fit) = &result.comparison.measured_fit {
                report.fit("dilation-upper-bound", fit);
            }
            let implied = result.prediction.implied_constants();
            report.table(Table::from_columns(
                "dilation",
                &[
                    ("lambda", &grid),
                    ("tilde_lambda", &result.prediction.tilde_lambda),
                    ("predicted", &implied),
                    ("measured", &result.measured),
                    ("slack", &result.comparison.slack),
                ],
            ));
        }
        PropagatorSpec::Calculus { family } => {
            let f = calculus_function(*family)?;
            f.check_hypotheses(base.max_frequency().powi(2))?;
            let tilde: Vec<f64> = grid.iter().map(|l| f.tilde_lambda(*l)).collect();
            let source = control_profile(&base, &q, &tilde, mu, gamma)?;
            let prediction = dilate_general(&source, &f, &grid)?;
            let implied = prediction.implied_constants();
            report.check(
                "dilation-finite",
                implied.iter().all(|v| v.is_finite()),
                implied.iter().cloned().fold(0.0, f64::max),
                0.0,
                format!("general calculus function {}", f.name()),
            );
            report.table(Table::from_columns(
                "dilation",
                &[("lambda", &grid), ("tilde_lambda", &prediction.tilde_lambda), ("predicted", &implied)],
            ));
        }
    }
    Ok(report)
}

/// Decay curve, spectral gap and the dissipation identity on a seeded state.
pub fn evolve_report(config: &ExperimentConfig) -> Result<ScenarioReport, RunError> {
    let model = config.model()?;
    let q = observation(config, &model)?;
    let times = config.time_values()?;
    let quotient = assemble_generator(&model, &q, true)?;
    let curve = decay_curve(&quotient, &times)?;
    let gap = spectral_gap(&quotient)?;
    let mut report = new_report(config, "evolve", "energy decay of the damped wave semigroup")?;
    report.check("monotone-decay", curve.monotone, curve.values[curve.values.len() - 1], 0.0, "N(t) nonincreasing");
    report.check("spectral-gap", gap > 0.0, gap, 0.0, "-max Re σ(Ȧ)");
    if let Some(fit) = &curve.fit {
        report.check(
            "decay-fit",
            fit.best.r2 >= config.tolerances.r2,
            fit.best.r2,
            config.tolerances.r2,
            format!("best law {:?} with parameter {:.6e}", fit.best.kind, fit.best.parameter),
        );
    }
    let full = assemble_generator(&model, &q, false)?;
    let mut rng = linalg::seeded_rng(config.seed);
    let u0 = linalg::random_unit_vector(&mut rng, model.dim());
    let v0 = linalg::random_unit_vector(&mut rng, model.dim());
    let sample: Vec<f64> = times.iter().map(|t| t.max(DISSIPATION_START)).collect();
    let mut sample_times = sample.clone();
    sample_times.dedup();
    let dissipation = dissipation_check(&full, &u0, &v0, &sample_times)?;
    report.check(
        "energy-dissipation",
        dissipation.passed,
        dissipation.max_relative_error,
        dampspec::evolution::DISSIPATION_TOL,
        "dE/dt + 2‖Qv‖² = 0",
    );
    report.table(Table::from_columns("decay", &[("t", &curve.times), ("N", &curve.values)]));
    let derivative: Vec<f64> = dissipation.rows.iter().map(|r| r.derivative).collect();
    let rate: Vec<f64> = dissipation.rows.iter().map(|r| r.dissipation).collect();
    report.table(Table::from_columns(
        "dissipation",
        &[("t", &sample_times), ("dE_dt", &derivative), ("two_Qv_squared", &rate)],
    ));
    Ok(report)
}

/// Turns a numeric error that only reflects the configuration into a field error.
pub fn require(condition: bool, field: &str, message: &str) -> Result<(), RunError> {
    if condition {
        Ok(())
    } else {
        Err(RunError::Numeric(LabError::InvalidArgument(format!("{field}: {message}"))))
    }
}
