use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use dampspec::resolvent::ExponentFit;
use serde::{Deserialize, Serialize};

use crate::error::RunError;

/// Name of the structured-text summary written next to the CSV tables.
pub const SUMMARY_FILE: &str = "summary.toml";

/// One pass/fail verdict with the number it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// A log-log or semi-log regression attached to a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub check: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Decades used, counted down from the top of the grid; infinite for the whole grid.
    pub window: f64,
}

impl FitRecord {
    pub fn from_exponent(check: &str, fit: &ExponentFit) -> Self {
        Self { check: check.into(), slope: fit.slope, intercept: fit.intercept, r2: fit.r2, window: fit.window }
    }
}

/// Raw numbers behind the checks, one CSV per table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(skip)]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    /// Builds a table from equally long columns.
    pub fn from_columns(name: &str, columns: &[(&str, &[f64])]) -> Self {
        let len = columns.first().map_or(0, |(_, v)| v.len());
        debug_assert!(columns.iter().all(|(_, v)| v.len() == len));
        let mut table = Self::new(name, &columns.iter().map(|(c, _)| *c).collect::<Vec<_>>());
        table.rows = (0..len).map(|i| columns.iter().map(|(_, v)| v[i]).collect()).collect();
        table
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        let versions = BTreeMap::from([
            ("dampspec".to_string(), dampspec::VERSION.to_string()),
            ("dampspec-lab".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        Self { config_hash, seed, versions }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    /// The statement the scenario exercises.
    pub anchor: String,
    pub provenance: Provenance,
    pub checks: Vec<CheckResult>,
    pub fits: Vec<FitRecord>,
    pub tables: Vec<Table>,
}

impl ScenarioReport {
    pub fn new(scenario: &str, anchor: &str, provenance: Provenance) -> Self {
        Self {
            scenario: scenario.into(),
            anchor: anchor.into(),
            provenance,
            checks: Vec::new(),
            fits: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&mut self, name: &str, passed: bool, measured: f64, tolerance: f64, detail: impl Into<String>) {
        self.checks.push(CheckResult { name: name.into(), passed, measured, tolerance, detail: detail.into() });
    }

    pub fn fit(&mut self, check: &str, fit: &ExponentFit) {
        self.fits.push(FitRecord::from_exponent(check, fit));
    }

    pub fn table(&mut self, table: Table) {
        self.tables.push(table);
    }
}

/// Fixed 17-significant-digit rendering; round-trips every `f64`.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn header_lines(report: &ScenarioReport) -> String {
    format!(
        "# scenario={}\n# config_hash={}\n# seed={}\n",
        report.scenario, report.provenance.config_hash, report.provenance.seed
    )
}

pub fn render_table(report: &ScenarioReport, table: &Table) -> Result<Vec<u8>, RunError> {
    let mut bytes = header_lines(report).into_bytes();
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut bytes);
    let csv_err = |e: csv::Error| RunError::Parse(e.to_string());
    writer.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        writer.write_record(row.iter().map(|x| format_number(*x))).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| RunError::io(&table.name, e))?;
    drop(writer);
    Ok(bytes)
}

pub fn render_summary(report: &ScenarioReport) -> Result<String, RunError> {
    let body = toml::to_string(report).map_err(|e| RunError::Parse(e.to_string()))?;
    Ok(format!("{}{body}", header_lines(report)))
}

/// Writes `<dir>/summary.toml` and one `<dir>/<table>.csv` per table.
///
/// A file whose content would change is first renamed to `<file>.bak`; an
/// identical file is left untouched.
pub fn emit_report(report: &ScenarioReport, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    let mut written = Vec::new();
    let summary = dir.join(SUMMARY_FILE);
    write_with_backup(&summary, render_summary(report)?.as_bytes())?;
    written.push(summary);
    for table in &report.tables {
        let path = dir.join(format!("{}.csv", table.name));
        write_with_backup(&path, &render_table(report, table)?)?;
        written.push(path);
    }
    Ok(written)
}

fn write_with_backup(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    match fs::read(path) {
        Ok(existing) if existing == bytes => return Ok(()),
        Ok(_) => {
            let mut backup = path.as_os_str().to_owned();
            backup.push(".bak");
            fs::rename(path, &backup).map_err(|e| RunError::io(path, e))?;
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(RunError::io(path, e)),
    }
    fs::write(path, bytes).map_err(|e| RunError::io(path, e))
}

/// Reads back a summary written by [`emit_report`]; tables are not restored.
pub fn read_summary(dir: &Path) -> Result<ScenarioReport, RunError> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).map_err(|e| RunError::io(&path, e))?;
    toml::from_str(&text).map_err(|e| RunError::Parse(format!("{}: {e}", path.display())))
}
