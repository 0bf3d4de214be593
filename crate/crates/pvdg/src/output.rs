//! CSV and JSON result files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use pvdg_core::{EmpiricalPdf, ImpactMetrics, OptimizationResult, Study, TrialRecord};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::{plan_to_file, InstallationEntry};

/// One metrics row as written by `powerflow`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub gamma_pct: f64,
    pub e_loss_kwh: f64,
    pub v_d: f64,
    pub f_r_tot_kwh: f64,
}

impl From<ImpactMetrics> for MetricsRow {
    fn from(m: ImpactMetrics) -> Self {
        MetricsRow { gamma_pct: m.gamma_pct, e_loss_kwh: m.e_loss_kwh, v_d: m.v_d, f_r_tot_kwh: m.f_r_tot_kwh }
    }
}

/// One Monte Carlo trial; metric fields are empty when the power flow diverged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub trial_id: usize,
    pub seed: u64,
    pub s: usize,
    pub gamma_pct: f64,
    pub e_loss_kwh: Option<f64>,
    pub v_d: Option<f64>,
    pub f_r_tot_kwh: Option<f64>,
    pub diverged: bool,
}

impl RecordRow {
    pub fn metrics(&self) -> Option<ImpactMetrics> {
        Some(ImpactMetrics {
            gamma_pct: self.gamma_pct,
            e_loss_kwh: self.e_loss_kwh?,
            v_d: self.v_d?,
            f_r_tot_kwh: self.f_r_tot_kwh?,
        })
    }
}

impl From<&TrialRecord> for RecordRow {
    fn from(r: &TrialRecord) -> Self {
        RecordRow {
            trial_id: r.trial_id,
            seed: r.seed,
            s: r.s,
            gamma_pct: r.gamma_pct,
            e_loss_kwh: r.metrics.map(|m| m.e_loss_kwh),
            v_d: r.metrics.map(|m| m.v_d),
            f_r_tot_kwh: r.metrics.map(|m| m.f_r_tot_kwh),
            diverged: r.diverged(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialPlan {
    pub trial_id: usize,
    pub s: usize,
    pub trial_index: usize,
    pub installations: Vec<SizedInstallation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SizedInstallation {
    pub bus: u32,
    pub beta: f64,
    pub kw: f64,
}

pub fn trial_plan(record: &TrialRecord, study: &Study) -> TrialPlan {
    let installations = study
        .candidates()
        .iter()
        .enumerate()
        .filter(|&(k, _)| record.selected[k])
        .map(|(k, c)| SizedInstallation { bus: c.bus.0, beta: record.beta[k], kw: record.plan.capacities_kw[k] })
        .collect();
    TrialPlan { trial_id: record.trial_id, s: record.s, trial_index: record.trial_index, installations }
}

/// Row of `optimal.csv`. Failed caps keep their row with `status` set to the error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalRow {
    pub gamma_cap_pct: f64,
    pub mode: String,
    pub gamma_pct: Option<f64>,
    pub e_loss_kwh: Option<f64>,
    pub v_d: Option<f64>,
    pub f_r_tot_kwh: Option<f64>,
    pub objective: Option<f64>,
    pub feasible: Option<bool>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimalEntry {
    pub gamma_cap_pct: f64,
    pub mode: String,
    #[serde(flatten)]
    pub outcome: OptimalOutcome,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum OptimalOutcome {
    Solved {
        installations: Vec<InstallationEntry>,
        metrics: MetricsRow,
        objective_value: f64,
        penalties: pvdg_core::PenaltyBreakdown,
        feasible: bool,
        evaluations: usize,
        convergence_trace: Vec<f64>,
    },
    Failed {
        error: String,
    },
}

impl OptimalEntry {
    pub fn new(gamma_cap_pct: f64, mode: &str, result: &pvdg_core::error::Result<OptimizationResult>, study: &Study) -> Self {
        let outcome = match result {
            Ok(r) => OptimalOutcome::Solved {
                installations: plan_to_file(&r.plan, study).installations,
                metrics: r.metrics.into(),
                objective_value: r.objective_value,
                penalties: r.penalties,
                feasible: r.feasible,
                evaluations: r.evaluations,
                convergence_trace: r.convergence_trace.clone(),
            },
            Err(e) => OptimalOutcome::Failed { error: e.to_string() },
        };
        OptimalEntry { gamma_cap_pct, mode: mode.to_string(), outcome }
    }

    pub fn row(&self) -> OptimalRow {
        match &self.outcome {
            OptimalOutcome::Solved { metrics, objective_value, feasible, .. } => OptimalRow {
                gamma_cap_pct: self.gamma_cap_pct,
                mode: self.mode.clone(),
                gamma_pct: Some(metrics.gamma_pct),
                e_loss_kwh: Some(metrics.e_loss_kwh),
                v_d: Some(metrics.v_d),
                f_r_tot_kwh: Some(metrics.f_r_tot_kwh),
                objective: Some(*objective_value),
                feasible: Some(*feasible),
                status: "ok".into(),
            },
            OptimalOutcome::Failed { error } => OptimalRow {
                gamma_cap_pct: self.gamma_cap_pct,
                mode: self.mode.clone(),
                gamma_pct: None,
                e_loss_kwh: None,
                v_d: None,
                f_r_tot_kwh: None,
                objective: None,
                feasible: None,
                status: error.clone(),
            },
        }
    }
}

/// `(γ, value, source)` row of the fig4/fig6 series files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub gamma_pct: f64,
    pub value: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub trial_id: usize,
    pub gamma_pct: f64,
    pub f_r_tot_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedRow {
    pub bin_lower_pct: f64,
    pub bin_upper_pct: f64,
    pub count: usize,
    pub gamma_mean_pct: f64,
    pub e_loss_mean_kwh: f64,
    pub e_loss_std_kwh: f64,
    pub v_d_mean: f64,
    pub v_d_std: f64,
    pub f_r_mean_kwh: f64,
    pub f_r_std_kwh: f64,
}

impl From<&pvdg_core::GammaBin> for BinnedRow {
    fn from(b: &pvdg_core::GammaBin) -> Self {
        BinnedRow {
            bin_lower_pct: b.lower_pct,
            bin_upper_pct: b.upper_pct,
            count: b.count,
            gamma_mean_pct: b.gamma_pct.mean,
            e_loss_mean_kwh: b.e_loss_kwh.mean,
            e_loss_std_kwh: b.e_loss_kwh.std_dev,
            v_d_mean: b.v_d.mean,
            v_d_std: b.v_d.std_dev,
            f_r_mean_kwh: b.f_r_tot_kwh.mean,
            f_r_std_kwh: b.f_r_tot_kwh.std_dev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfRow {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    pub density: f64,
}

pub fn pdf_rows(pdf: &EmpiricalPdf) -> Vec<PdfRow> {
    pdf.bin_edges
        .windows(2)
        .zip(pdf.densities.iter().zip(&pdf.counts))
        .map(|(w, (&density, &count))| PdfRow { left: w[0], right: w[1], count, density })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| csv_error(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let record = e.position().map(|p| p.record()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        kind => CliError::Csv { path: path.to_path_buf(), record, message: format!("{kind:?}") },
    }
}

pub fn write_lines(path: &Path, lines: &[String]) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in lines {
        writeln!(w, "{l}").map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}
