use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dampspec_lab::config::{validate_config, ExperimentConfig, PropagatorSpec};
use dampspec_lab::error::{RunError, EXIT_CHECK_FAILURE};
use dampspec_lab::report::{emit_report, read_summary, ScenarioReport};
use dampspec_lab::{pipeline, scenario};

/// Environment variable holding the worker count; the only setting read from the environment.
const WORKERS_VAR: &str = "DAMPSPEC_WORKERS";

#[derive(Parser)]
#[command(name = "dampspec", version, about = "Spectral laboratory for damped wave generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the mode table of the configured model.
    Model(ConfigArgs),
    /// Pencil and generator resolvent norms along the λ grid.
    Sweep(ConfigArgs),
    /// Weighted control constants along the λ grid.
    Control(ConfigArgs),
    /// Transport control constants from the base model to the configured propagator.
    Dilate(ConfigArgs),
    /// Decay curve, spectral gap and energy dissipation on the time grid.
    Evolve(ConfigArgs),
    /// Run a registered scenario (defaults to the one named in the config).
    Scenario {
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Print the verdicts of a report directory written earlier.
    Report { dir: PathBuf },
}

/// Overrides mirror the configuration fields of the same name.
#[derive(Args)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    cutoff: Option<usize>,
    /// Exponent of a power propagator `Δ^α`.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda_min: Option<f64>,
    #[arg(long)]
    lambda_max: Option<f64>,
    #[arg(long)]
    lambda_points: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for the summary and CSV tables.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, RunError> {
        let text = fs::read_to_string(&self.config).map_err(|e| RunError::io(&self.config, e))?;
        let mut config = ExperimentConfig::from_toml(&text)?;
        if let Some(cutoff) = self.cutoff {
            config.model.cutoff = cutoff;
        }
        if let Some(alpha) = self.alpha {
            config.propagator = PropagatorSpec::Power { alpha };
        }
        if let Some(grid) = config.lambda_grid.as_mut() {
            grid.min = self.lambda_min.unwrap_or(grid.min);
            grid.max = self.lambda_max.unwrap_or(grid.max);
            grid.points = self.lambda_points.or(grid.points);
        }
        config.weights.mu = self.mu.unwrap_or(config.weights.mu);
        config.weights.gamma = self.gamma.unwrap_or(config.weights.gamma);
        config.seed = self.seed.unwrap_or(config.seed);
        if self.output.is_some() {
            config.output.clone_from(&self.output);
        }
        validate_config(&config)?;
        Ok(config)
    }
}

fn print_report(report: &ScenarioReport) {
    println!("{}: {}", report.scenario, report.anchor);
    println!("config hash {} seed {}", report.provenance.config_hash, report.provenance.seed);
    for check in &report.checks {
        let verdict = if check.passed { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {} measured={:.6e} tolerance={:.6e} ({})",
            check.name, check.measured, check.tolerance, check.detail
        );
    }
    for fit in &report.fits {
        println!("fit {} slope={:.6} r2={:.6} window={}", fit.check, fit.slope, fit.r2, fit.window);
    }
}

fn execute(command: Command) -> Result<ScenarioReport, RunError> {
    let (config, report) = match command {
        Command::Report { dir } => return read_summary(&dir),
        Command::Model(args) => {
            let config = args.load()?;
            let report = pipeline::model_report(&config)?;
            (config, report)
        }
        Command::Sweep(args) => {
            let config = args.load()?;
            let report = pipeline::sweep_report(&config)?;
            (config, report)
        }
        Command::Control(args) => {
            let config = args.load()?;
            let report = pipeline::control_report(&config)?;
            (config, report)
        }
        Command::Dilate(args) => {
            let config = args.load()?;
            let report = pipeline::dilate_report(&config)?;
            (config, report)
        }
        Command::Evolve(args) => {
            let config = args.load()?;
            let report = pipeline::evolve_report(&config)?;
            (config, report)
        }
        Command::Scenario { name, config: args } => {
            let config = args.load()?;
            let name = name.unwrap_or_else(|| config.scenario.clone());
            let report = scenario::run_scenario(&name, &config)?;
            (config, report)
        }
    };
    if let Some(dir) = &config.output {
        for path in emit_report(&report, dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(report)
}

fn configure_workers() -> Result<(), String> {
    let Ok(value) = std::env::var(WORKERS_VAR) else { return Ok(()) };
    let workers: usize = value.parse().map_err(|_| format!("{WORKERS_VAR} must be a positive integer, got '{value}'"))?;
    if workers == 0 {
        return Err(format!("{WORKERS_VAR} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(workers).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(message) = configure_workers() {
        eprintln!("error: {message}");
        return ExitCode::from(dampspec_lab::error::EXIT_INVALID_CONFIG);
    }
    match execute(cli.command) {
        Ok(report) => {
            print_report(&report);
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CHECK_FAILURE)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
