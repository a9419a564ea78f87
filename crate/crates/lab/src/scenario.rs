//! Registered end-to-end scenarios. Each runs a fixed pipeline on the
//! configured model and records its verdicts in a [`ScenarioReport`].

use dampspec::control::{control_profile, control_to_resolvent_prediction, resolvent_to_control_prediction,
    schrodinger_observability_constant, CalibratedComparison};
use dampspec::damping::{multiplier_observation, DampingFunctionSpec};
use dampspec::dilation::{carleman_growth_check, fractional_propagation_check, optimality_ladder, Arc};
use dampspec::evolution::{backward_uniqueness_probe, decay_curve, weak_monotonicity_experiment};
use dampspec::resolvent::{assemble_generator, fit_exponent, resolvent_sweep};

use crate::config::{validate_config, ExperimentConfig};
use crate::error::RunError;
use crate::pipeline::{new_report, observation, require, sweep_table};
use crate::report::{ScenarioReport, Table};

type Body = fn(&ExperimentConfig, &mut ScenarioReport) -> Result<(), RunError>;

pub struct ScenarioInfo {
    pub name: &'static str,
    /// The statement the scenario exercises, written into every report.
    pub anchor: &'static str,
    body: Body,
}

pub const SCENARIOS: [ScenarioInfo; 8] = [
    ScenarioInfo {
        name: "lp-damping",
        anchor: "L^p damping with W in L^p: resolvent grows at most like λ^{1/p}",
        body: lp_damping,
    },
    ScenarioInfo {
        name: "water-waves",
        anchor: "damped gravity water waves: weighted control estimate implies the resolvent bound λ^{4μ}(M² + m²)",
        body: water_waves,
    },
    ScenarioInfo {
        name: "plate",
        anchor: "plate with viscous and structural damping: bounded resolvent and the converse control estimate",
        body: plate,
    },
    ScenarioInfo {
        name: "schrodinger-obs",
        anchor: "Schrödinger observability gives decay at rate ⟨t⟩^{-1/(2+8γ)}",
        body: schrodinger_obs,
    },
    ScenarioInfo {
        name: "monotonicity",
        anchor: "larger damping decays at least as fast, up to squaring the resolvent",
        body: monotonicity,
    },
    ScenarioInfo {
        name: "fractional-propagation",
        anchor: "fractional propagation: the λ^{-2+1/α} weight is optimal",
        body: fractional_propagation,
    },
    ScenarioInfo {
        name: "carleman",
        anchor: "Carleman-type growth e^{Cλ^{1/α}} of observability constants on small sets",
        body: carleman,
    },
    ScenarioInfo {
        name: "backward-uniqueness",
        anchor: "backward uniqueness: the damped wave semigroup is injective",
        body: backward_uniqueness,
    },
];

pub fn lookup(name: &str) -> Option<&'static ScenarioInfo> {
    SCENARIOS.iter().find(|s| s.name == name)
}

pub fn names() -> Vec<&'static str> {
    SCENARIOS.iter().map(|s| s.name).collect()
}

/// Validates `config` and runs the named scenario on it.
pub fn run_scenario(name: &str, config: &ExperimentConfig) -> Result<ScenarioReport, RunError> {
    let info = lookup(name).ok_or_else(|| RunError::UnknownScenario(name.into()))?;
    validate_config(config)?;
    let mut report = new_report(config, info.name, info.anchor)?;
    (info.body)(config, &mut report)?;
    Ok(report)
}

fn comparison_table(name: &str, cmp: &CalibratedComparison) -> Table {
    Table::from_columns(
        name,
        &[
            ("lambda", &cmp.lambda_grid),
            ("predicted", &cmp.predicted),
            ("measured", &cmp.measured),
            ("slack", &cmp.slack),
        ],
    )
}

fn record_comparison(report: &mut ScenarioReport, check: &str, cmp: &CalibratedComparison) {
    report.check(
        check,
        cmp.violations == 0,
        cmp.violations as f64,
        0.0,
        format!("calibration {:.6e} from {} point(s)", cmp.calibration, cmp.calibration_points),
    );
    if let Some(fit) = &cmp.measured_fit {
        report.fit(check, fit);
    }
    report.table(comparison_table(check, cmp));
}

/// The first indicator profile, read as the observed arc.
fn arc(config: &ExperimentConfig) -> Result<Arc, RunError> {
    let found = config.damping.profiles.iter().find_map(|p| match p {
        DampingFunctionSpec::Indicator { start, end, .. } => Some((*start, *end)),
        _ => None,
    });
    require(found.is_some(), "damping.profiles", "this scenario needs an indicator profile for the arc")?;
    let (start, end) = found.unwrap_or_default();
    Ok(Arc::new(start, end)?)
}

fn lp_damping(config: &ExperimentConfig, report: &mut ScenarioReport) -> Result<(), RunError> {
    let exponent = config.damping.profiles.iter().find_map(|p| match p {
        DampingFunctionSpec::PowerSingular { exponent, .. } => Some(*exponent),
        _ => None,
    });
    require(exponent.is_some(), "damping.profiles", "lp-damping needs a power-singular profile")?;
    let beta = exponent.unwrap_or_default();
    require(beta > 0.0 && beta < 0.5, "damping.profiles", "the singular exponent β must lie in (0, 1/2)")?;
    // β = 1/(2p') with p' the conjugate exponent of p.
    let p = 1.0 / (1.0 - 2.0 * beta);
    let model = config.model()?;
    let q = observation(config, &model)?;
    let grid = config.lambda_values()?;
    let sweep = resolvent_sweep(&assemble_generator(&model, &q, false)?, &grid, config.tolerances.fit_window)?;
    let fit = fit_exponent(&grid, &sweep.generator_norms, config.tolerances.fit_window)?;
    let bound = 1.0 / p + config.tolerances.lp_margin;
    report.check("lp-resolvent-exponent", fit.slope <= bound, fit.slope, bound, format!("p = {p}"));
    report.fit("lp-resolvent-exponent", &fit);
    report.table(sweep_table(&sweep));
    Ok(())
}

fn water_waves(config: &ExperimentConfig, report: &mut ScenarioReport) -> Result<(), RunError> {
    let model = config.model()?;
    let q = observation(config, &model)?;
    let grid = config.lambda_values()?;
    let (mu, gamma) = (config.weights.mu, config.weights.gamma);
    let sweep = resolvent_sweep(&assemble_generator(&model, &q, false)?, &grid, config.tolerances.fit_window)?;
    let profile = control_profile(&model, &q, &grid, mu, gamma)?;
    let cmp = control_to_resolvent_prediction(&profile, &sweep.generator_norms)?;
    record_comparison(report, "control-to-resolvent", &cmp);
    report.table(sweep_table(&sweep));
    Ok(())
}

fn plate(config: &ExperimentConfig, report: &mut ScenarioReport) -> Result<(), RunError> {
    let model = config.model()?;
    let q = observation(config, &model)?;
    let grid = config.lambda_values()?;
    let (mu, gamma) = (config.weights.mu, config.weights.gamma);
    let sweep = resolvent_sweep(&assemble_generator(&model, &q, false)?, &grid, config.tolerances.fit_window)?;
    let flat = fit_exponent(&grid, &sweep.generator_norms, f64::INFINITY)?;
    let tol = config.tolerances.flatness;
    report.check("bounded-resolvent", flat.slope <= tol, flat.slope, tol, "log-log slope of ‖(A+iλ)⁻¹‖ from above");
    report.fit("bounded-resolvent", &flat);
    let profile = control_profile(&model, &q, &grid, mu, gamma)?;
    let cmp = resolvent_to_control_prediction(&sweep, mu, gamma, &profile.k_values)?;
    record_comparison(report, "resolvent-to-control", &cmp);
    report.table(sweep_table(&sweep));
    Ok(())
}

fn schrodinger_obs(config: &ExperimentConfig, report: &mut ScenarioReport) -> Result<(), RunError> {
    let model = config.model()?;
    let q = observation(config, &model)?;
    let grid = config.lambda_values()?;
    let constants = grid
        .iter()
        .map(|&l| Ok(schrodinger_observability_constant(&model, &q, l)?.value))
        .collect::<Result<Vec<f64>, RunError>>()?;
    let flat = fit_exponent(&grid, &constants, f64::INFINITY)?;
    let tol = config.tolerances.flatness;
    report.check("observability-flat", flat.slope.abs() <= tol, flat.slope, tol, "|log-log slope| of C(λ)");
    report.fit("observability-flat", &flat);
    report.table(Table::from_columns("observability", &[("lambda", &grid), ("constant", &constants)]));

    let times = config.time_values()?;
    let curve = decay_curve(&assemble_generator(&model, &q, true)?, &times)?;
    let rate = 1.0 / (2.0 + 8.0 * config.weights.gamma);
    // N(t) t^{rate} must not grow once t ≥ 1.
    let (late_t, scaled): (Vec<f64>, Vec<f64>) = curve
        .times
        .iter()
        .zip(&curve.values)
        .filter(|(t, _)| **t >= 1.0)
        .map(|(t, v)| (*t, v * t.powf(rate)))
        .unzip();
    let trend = fit_exponent(&late_t, &scaled, f64::INFINITY)?;
    report.check(
        "decay-at-least-rate",
        trend.slope <= tol,
        trend.slope,
        tol,
        format!("slope of N(t) t^{rate} for t ≥ 1"),
    );
    report.fit("decay-at-least-rate", &trend);
    report.table(Table::from_columns("decay", &[("t", &curve.times), ("N", &curve.values)]));
    Ok(())
}

fn monotonicity(config: &ExperimentConfig, report: &mut ScenarioReport) -> Result<(), RunError> {
    let profiles = &config.damping.profiles;
    require(profiles.len() == 2, "damping.profiles", "monotonicity needs exactly [weaker, stronger]")?;
    let model = config.model()?;
    let weak = multiplier_observation(&model, &profiles[0])?;
    let strong = multiplier_observation(&model, &profiles[1])?;
    let grid = config.lambda_values()?;
    let times = config.time_values()?;
    let result = weak_monotonicity_experiment(&model, &weak, &strong, &grid, &times, config.seed)?;
    report.check(
        "domination",
        result.random_check_ratio <= 1.0 + 1e-8,
        result.random_check_ratio,
        1.0,
        format!("C₀ = {:.6e}", result.domination_constant),
    );
    record_comparison(report, "weak-monotonicity", &result.comparison);
    report.table(Table::from_columns(
        "decay",
        &[
            ("t", &result.decay_weak.times),
            ("N_weak", &result.decay_weak.values),
            ("N_strong", &result.decay_strong.values),
        ],
    ));
    Ok(())
}

fn fractional_propagation(config: &ExperimentConfig, report: &mut ScenarioReport) -> Result<(), RunError> {
    let grid_spec = config.lambda_grid.as_ref();
    require(
        grid_spec.is_some_and(|g| g.spacing == crate::config::Spacing::Resonant),
        "lambda_grid.spacing",
        "fractional-propagation runs on a resonant ladder",
    )?;
    let orders = grid_spec.map(|g| g.orders()).unwrap_or_default();
    let base = config.base_model()?;
    let omega = arc(config)?;
    let alpha = config.propagator.alpha();
    let ladder = optimality_ladder(&base, omega, alpha, &orders)?;
    let distance = (ladder.fit.slope - ladder.expected_slope).abs();
    report.check(
        "witness-exponent",
        distance <= config.tolerances.slope,
        ladder.fit.slope,
        config.tolerances.slope,
        format!("expected 2 - 1/α = {}", ladder.expected_slope),
    );
    report.fit("witness-exponent", &ladder.fit);
    let lambdas: Vec<f64> = ladder.rows.iter().map(|r| r.lambda).collect();
    let ratios: Vec<f64> = ladder.rows.iter().map(|r| r.ratio).collect();
    report.table(Table::from_columns("witness", &[("lambda", &lambdas), ("ratio", &ratios)]));
    let grid = config.lambda_values()?;
    let propagation = fractional_propagation_check(&base, omega, alpha, &grid)?;
    report.check(
        "propagation-flat",
        propagation.fit.slope.abs() <= config.tolerances.flatness,
        propagation.fit.slope,
        config.tolerances.flatness,
        "constants with the λ^{-2+1/α} weight stay bounded",
    );
    report.fit("propagation-flat", &propagation.fit);
    report.table(Table::from_columns("propagation", &[("lambda", &grid), ("constant", &propagation.constants)]));
    Ok(())
}

fn carleman(config: &ExperimentConfig, report: &mut ScenarioReport) -> Result<(), RunError> {
    let base = config.base_model()?;
    let omega = arc(config)?;
    let grid = config.lambda_values()?;
    let result = carleman_growth_check(&base, omega, config.propagator.alpha(), &grid)?;
    report.check(
        "carleman-growth",
        result.passed,
        result.primary.r2,
        dampspec::dilation::CARLEMAN_R2,
        format!("R² against λ^{{1/(2α)}}: {:.6}", result.alternative.r2),
    );
    report.table(Table::from_columns("carleman", &[("lambda", &grid), ("constant", &result.constants)]));
    Ok(())
}

fn backward_uniqueness(config: &ExperimentConfig, report: &mut ScenarioReport) -> Result<(), RunError> {
    let model = config.model()?;
    let q = observation(config, &model)?;
    let times = config.time_values()?;
    let positive: Vec<f64> = times.into_iter().filter(|t| *t > 0.0).collect();
    let result = backward_uniqueness_probe(&assemble_generator(&model, &q, false)?, &positive)?;
    report.check("injective", result.injective, result.min_sigma, 0.0, "smallest σ_min(e^{tA}) on the grid");
    report.table(Table::from_columns(
        "singular-values",
        &[("t", &result.times), ("sigma_min", &result.sigma_min), ("sigma_max", &result.sigma_max)],
    ));
    Ok(())
}
