//! Machine-readable output bundles and file writers.
//!
//! Every bundle carries the tool version and a hash of the canonical
//! configuration so results stay attributable. Floats are written with
//! Rust's shortest round-trip formatting, which makes identical runs
//! byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tandem::montecarlo::{EstimateReport, EventRecord, Spectrum};
use tandem::pathspace::Sign;
use tandem::predict::{Correlators, NoSignalingReport, PredictionTable};

use crate::CliError;

/// FNV-1a, 64-bit; enough to fingerprint a config file.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub config_hash: String,
}

impl Metadata {
    pub fn new(config_text: &str) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: format!("{:016x}", fnv1a64(config_text.as_bytes())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionBundle {
    pub metadata: Metadata,
    pub table: PredictionTable,
    pub correlators: Correlators,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub value: f64,
    pub qm: f64,
    pub ms: f64,
    pub ms_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanBundle {
    pub metadata: Metadata,
    pub parameter: String,
    pub quantity: String,
    pub timing: String,
    pub rows: Vec<ScanRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditBundle {
    pub metadata: Metadata,
    pub analytic: Vec<NoSignalingReport>,
    pub empirical: Vec<EmpiricalMarginal>,
}

/// Sample-level non-selective marginal check for one engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMarginal {
    pub theory: String,
    pub timing: Option<String>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub trials: u64,
    pub observed: f64,
    pub std_error: f64,
    pub within_four_sigma: bool,
}

/// Output format of the machine artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("bundle serializes");
    text.push('\n');
    text
}

/// `prediction.csv`: one quantity per row, parseable and diffable.
pub fn prediction_csv(bundle: &PredictionBundle) -> String {
    let mut out = String::from("quantity,sigma,omega,value\n");
    let table = &bundle.table;
    for sigma in Sign::BOTH {
        for omega in Sign::BOTH {
            let _ = writeln!(out, "joint,{sigma}1,{omega}1,{}", table.joint(sigma, omega));
        }
    }
    for sigma in Sign::BOTH {
        let _ = writeln!(
            out,
            "marginal_sigma,{sigma}1,,{}",
            table.marginal_sigma(sigma)
        );
    }
    let _ = writeln!(out, "e_sigma_omega,,,{}", bundle.correlators.e_sigma_omega);
    let _ = writeln!(out, "e_sigma,,,{}", bundle.correlators.e_sigma);
    let _ = writeln!(out, "e_omega,,,{}", bundle.correlators.e_omega);
    let _ = writeln!(out, "valid,,,{}", table.validity.valid);
    out
}

/// Event rows: `trial,path,subensemble,sigma,omega,t1_s,t2_s`. The path
/// column is `-` for QM records (no realized path exists); omega and t2_s
/// are empty for lost events.
pub fn events_csv(events: &[EventRecord]) -> String {
    let mut out = String::with_capacity(events.len() * 48 + 64);
    out.push_str("trial,path,subensemble,sigma,omega,t1_s,t2_s\n");
    for event in events {
        let path = event
            .path
            .map(|p| p.code())
            .unwrap_or_else(|| "-".to_string());
        let omega = event.omega.map(|o| format!("{o}1")).unwrap_or_default();
        let t2 = event.t2_s.map(|t| t.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{}1,{},{},{}",
            event.trial,
            path,
            event.subensemble.label(),
            event.sigma,
            omega,
            event.t1_s,
            t2
        );
    }
    out
}

/// `spectrum.csv`: occupied bins plus the detected peak list as comments.
pub fn spectrum_csv(spectrum: &Spectrum) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# bin_width_s = {}", spectrum.bin_width_s());
    let _ = writeln!(
        out,
        "# total_coincidences = {}",
        spectrum.total_coincidences
    );
    for peak in &spectrum.peaks {
        let _ = writeln!(
            out,
            "# peak center_s = {} count = {} fraction = {}",
            peak.center_s, peak.count, peak.fraction
        );
    }
    out.push_str("delay_s,count\n");
    for (center, count) in spectrum.bins() {
        let _ = writeln!(out, "{center},{count}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBundle {
    pub metadata: Metadata,
    pub theory: String,
    pub timing: Option<String>,
    pub counts: CountsBundle,
    pub selected_events: u64,
    pub e_sigma_omega: EstimateEntry,
    pub e_sigma: EstimateEntry,
    pub e_omega: EstimateEntry,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountsBundle {
    pub pp: u64,
    pub pm: u64,
    pub mp: u64,
    pub mm: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateEntry {
    pub value: f64,
    pub std_error: f64,
    /// Closed-form prediction for the windowed mixture, when available.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
}

impl EstimateBundle {
    pub fn new(
        metadata: Metadata,
        theory: String,
        timing: Option<String>,
        report: &EstimateReport,
        expected: Option<Correlators>,
    ) -> Self {
        let entry =
            |value: tandem::montecarlo::Estimate, expected_value: Option<f64>| EstimateEntry {
                value: value.value,
                std_error: value.std_error,
                expected: expected_value,
            };
        Self {
            metadata,
            theory,
            timing,
            counts: CountsBundle {
                pp: report.counts.get(Sign::Plus, Sign::Plus),
                pm: report.counts.get(Sign::Plus, Sign::Minus),
                mp: report.counts.get(Sign::Minus, Sign::Plus),
                mm: report.counts.get(Sign::Minus, Sign::Minus),
            },
            selected_events: report.selected_events,
            e_sigma_omega: entry(report.e_sigma_omega, expected.map(|c| c.e_sigma_omega)),
            e_sigma: entry(report.e_sigma, expected.map(|c| c.e_sigma)),
            e_omega: entry(report.e_omega, expected.map(|c| c.e_omega)),
        }
    }
}

/// `scan.csv` with the quantity named in the column headers.
pub fn scan_csv(bundle: &ScanBundle) -> String {
    let mut out = format!(
        "{},qm_{},ms_{},ms_valid\n",
        bundle.parameter, bundle.quantity, bundle.quantity
    );
    for row in &bundle.rows {
        let _ = writeln!(out, "{},{},{},{}", row.value, row.qm, row.ms, row.ms_valid);
    }
    out
}
