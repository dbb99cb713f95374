//! Structured outputs: the per-snapshot CSV and the JSON run report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{BflError, Result};
use crate::identities::IdentityReport;
use crate::probe::DiagnosticsRecord;
use crate::speed::SamplingOffset;

/// Version tag of the CSV column layout, repeated in every JSON report.
pub const CSV_SCHEMA: &str = "bfl-csv-v1";

pub const CSV_COLUMNS: [&str; 10] = [
    "t",
    "unit_drift",
    "energy",
    "grad_norm",
    "rhs_norm",
    "rhs_dual_norm",
    "delta_norm",
    "grad_margin",
    "dual_margin",
    "oracle_error",
];

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Divergence,
    ThresholdFailure,
    ConfigError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Divergence => 2,
            Status::ThresholdFailure => 3,
            Status::ConfigError => 4,
        }
    }

    /// Exit status for an error that stopped a command before it produced a report.
    pub fn of_error(e: &BflError) -> Self {
        match e {
            BflError::Divergence { .. } | BflError::NonFinite { .. } => Status::Divergence,
            _ => Status::ConfigError,
        }
    }

    /// The worse of two statuses.
    pub fn and(self, other: Status) -> Status {
        if other.exit_code() > self.exit_code() {
            other
        } else {
            self
        }
    }
}

/// Curvature peak of one snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakRow {
    pub t: f64,
    pub x: f64,
    pub curvature: f64,
    pub torsion: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_time: f64,
    pub steps: usize,
    pub dt: f64,
    pub max_unit_drift: f64,
    /// `max_k |E_k − E_0| / |E_0|`.
    pub energy_drift: f64,
    pub min_grad_margin: f64,
    pub min_dual_margin: f64,
    pub final_oracle_error: Option<f64>,
    pub max_oracle_error: Option<f64>,
    /// Least-squares slope of the curvature peak position.
    pub peak_speed: Option<f64>,
    pub anchor_dispersion: Option<f64>,
    /// `max | |D⁺γ| − 1 |` over the stored curves.
    pub arc_length_drift: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub level: u32,
    pub nodes: usize,
    pub h: f64,
    pub dt: f64,
    pub error: f64,
    /// `log₂(e_{j−1} / e_j)`, absent on the first row.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub offset: SamplingOffset,
    /// `"oracle"` when measured against a closed form, `"successive"` for differences of consecutive levels.
    pub reference: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub eps: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub horizon: f64,
    pub rows: Vec<StabilityRow>,
    pub spread: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub command: String,
    pub config: Option<ExperimentConfig>,
    pub status: Status,
    pub exit_code: i32,
    pub error: Option<String>,
    pub notes: Vec<String>,
    pub records: Vec<DiagnosticsRecord>,
    pub summary: Option<RunSummary>,
    pub peaks: Vec<PeakRow>,
    pub convergence: Vec<ConvergenceTable>,
    pub stability: Option<StabilityTable>,
    pub identities: Option<IdentityReport>,
}

impl RunReport {
    pub fn new(command: &str, config: Option<ExperimentConfig>) -> Self {
        Self {
            schema: CSV_SCHEMA.into(),
            command: command.into(),
            config,
            status: Status::Pass,
            exit_code: 0,
            error: None,
            notes: Vec::new(),
            records: Vec::new(),
            summary: None,
            peaks: Vec::new(),
            convergence: Vec::new(),
            stability: None,
            identities: None,
        }
    }

    pub fn set_status(&mut self, status: Status) {
        self.status = self.status.and(status);
        self.exit_code = self.status.exit_code();
    }

    pub fn fail(&mut self, e: &BflError) {
        self.set_status(Status::of_error(e));
        self.error = Some(e.to_string());
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report fields serialize");
        s.push('\n');
        s
    }
}

fn num(x: f64) -> String {
    // Shortest representation that reads back to the same double.
    format!("{x:e}")
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in records {
        let cols = [
            num(r.t),
            num(r.unit_drift),
            num(r.energy),
            num(r.grad_norm),
            num(r.rhs_norm),
            num(r.rhs_dual_norm),
            num(r.delta_norm),
            num(r.grad_margin),
            num(r.dual_margin),
            r.oracle_error.map(num).unwrap_or_default(),
        ];
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

pub fn convergence_csv(table: &ConvergenceTable) -> String {
    let mut out = String::from("level,nodes,h,dt,error,order\n");
    for r in &table.rows {
        let order = r.order.map(num).unwrap_or_default();
        let _ = writeln!(out, "{},{},{},{},{},{}", r.level, r.nodes, num(r.h), num(r.dt), num(r.error), order);
    }
    out
}

pub fn stability_csv(table: &StabilityTable) -> String {
    let mut out = String::from("eps,initial_distance,final_distance,ratio\n");
    for r in &table.rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            num(r.eps),
            num(r.initial_distance),
            num(r.final_distance),
            num(r.ratio)
        );
    }
    out
}

/// Writes `contents` to `dir/file`, creating `dir` if needed.
pub fn write_output(dir: &Path, file: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(file);
    std::fs::write(&path, contents)?;
    Ok(path)
}
