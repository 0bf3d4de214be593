//! Subcommand implementations. Each returns the lines it wants printed; the
//! binary only handles argument parsing, thread pools and exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use pvdg_core::{
    analysis, bin_by_gamma, empirical_pdf, find_minimum_gamma, fit_quadratic, optimizer, run_trials, solve_series,
    sweep_optimal, BinRule, EmpiricalPdf, FitResult, ImpactMetrics, InstallationPlan, MonteCarloConfig, ObjectiveMode,
    OptimizerConfig, Study, SweepSettings,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io::{load_plan, load_study, write_json, StudyPaths};
use crate::output::{
    pdf_rows, read_csv, trial_plan, write_csv, BinnedRow, MetricsRow, OptimalEntry, OptimalRow, RecordRow,
    ScatterRow, SeriesRow,
};

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Loads and validates the study, reporting its size.
pub fn cmd_validate(paths: &StudyPaths) -> CliResult<Vec<String>> {
    let study = load_study(paths)?;
    let net = study.network();
    Ok(vec![
        format!("{} buses, {} lines, radial: ok", net.bus_count(), net.lines().len()),
        format!(
            "{} solar-ready buses, {} kW total ceiling",
            study.candidates().len(),
            fmt_kw(study.total_capacity_kw())
        ),
        format!("{} timesteps, peak load {} kW", study.horizon(), fmt_kw(study.peak_load_kw())),
    ])
}

fn fmt_kw(x: f64) -> String {
    format!("{x:.1}")
}

#[derive(Debug, Clone, Serialize)]
pub struct VoltageRow {
    pub t: usize,
    pub bus: u32,
    pub v_pu: f64,
    pub angle_deg: f64,
}

/// Series power flow of the baseline or a given plan; writes
/// `powerflow_metrics.csv` and `powerflow_voltages.csv`.
pub fn cmd_powerflow(study: &Study, plan_file: Option<&Path>, out: &Path) -> CliResult<Vec<String>> {
    let plan = match plan_file {
        Some(p) => load_plan(p, study)?,
        None => InstallationPlan::empty(study.candidates().len()),
    };
    let solution = solve_series(study, &plan, &SweepSettings::default())?;
    let metrics = ImpactMetrics::evaluate(study, &plan, &solution)?;
    ensure_dir(out)?;
    write_csv(&out.join("powerflow_metrics.csv"), &[MetricsRow::from(metrics)])?;
    let buses = study.network().buses();
    let voltages: Vec<VoltageRow> = solution
        .v
        .iter()
        .enumerate()
        .flat_map(|(t, step)| {
            step.iter().zip(buses).map(move |(v, b)| VoltageRow {
                t,
                bus: b.id.0,
                v_pu: v.re.hypot(v.im),
                angle_deg: v.im.atan2(v.re).to_degrees(),
            })
        })
        .collect();
    write_csv(&out.join("powerflow_voltages.csv"), &voltages)?;
    let (lo, hi) = solution.voltage_range();
    let iters = solution.iterations.iter().max().copied().unwrap_or(0);
    Ok(vec![
        format!("{} timesteps converged, at most {iters} sweeps", solution.horizon()),
        format!("voltage range [{lo:.5}, {hi:.5}] pu"),
        "gamma_pct,e_loss_kwh,v_d,f_r_tot_kwh".into(),
        format!("{},{},{},{}", metrics.gamma_pct, metrics.e_loss_kwh, metrics.v_d, metrics.f_r_tot_kwh),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeArg {
    Combined(Option<f64>),
    Loss,
    Voltage,
}

impl ModeArg {
    pub fn resolve(self, study: &Study) -> CliResult<ObjectiveMode> {
        Ok(match self {
            ModeArg::Loss => ObjectiveMode::Weighted(0.0),
            ModeArg::Voltage => ObjectiveMode::VoltageOnly,
            ModeArg::Combined(Some(w)) => ObjectiveMode::Weighted(w),
            ModeArg::Combined(None) => {
                ObjectiveMode::Weighted(optimizer::default_omega(study, &SweepSettings::default())?)
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeArg::Combined(_) => "combined",
            ModeArg::Loss => "loss",
            ModeArg::Voltage => "voltage",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub gammas: Vec<f64>,
    pub mode: ModeArg,
    pub seed: u64,
    pub swarm: usize,
    pub iters: usize,
}

/// Writes `optimal.csv`, `optimal_results.json`, `fig4_optimal.csv` and
/// `fig6_optimal.csv`. Fails only when every cap failed.
pub fn cmd_optimize(study: &Study, opts: &OptimizeOptions, out: &Path) -> CliResult<Vec<String>> {
    let mode = opts.mode.resolve(study)?;
    let config = OptimizerConfig {
        mode,
        seed: opts.seed,
        swarm_size: opts.swarm,
        max_iters: opts.iters,
        ..OptimizerConfig::default()
    };
    let results = sweep_optimal(study, &opts.gammas, &config)?;
    let entries: Vec<OptimalEntry> = opts
        .gammas
        .iter()
        .zip(&results)
        .map(|(&g, r)| OptimalEntry::new(g, opts.mode.name(), r, study))
        .collect();
    let rows: Vec<OptimalRow> = entries.iter().map(OptimalEntry::row).collect();
    ensure_dir(out)?;
    write_csv(&out.join("optimal.csv"), &rows)?;
    write_json(&out.join("optimal_results.json"), &entries)?;
    let series = |f: fn(&ImpactMetrics) -> f64| -> Vec<SeriesRow> {
        results
            .iter()
            .flatten()
            .map(|r| SeriesRow { gamma_pct: r.metrics.gamma_pct, value: f(&r.metrics), source: "optimal".into() })
            .collect()
    };
    write_csv(&out.join("fig4_optimal.csv"), &series(|m| m.v_d))?;
    write_csv(&out.join("fig6_optimal.csv"), &series(|m| m.e_loss_kwh))?;

    let mut lines = vec![format!("mode {}, {:?}", opts.mode.name(), mode)];
    let mut failed = Vec::new();
    for (row, r) in rows.iter().zip(&results) {
        match r {
            Ok(res) => lines.push(format!(
                "cap {:>5}%: gamma {:.2}%, E_loss {:.3} kWh, v_D {:.6}, F_r {:.3} kWh{}",
                row.gamma_cap_pct,
                res.metrics.gamma_pct,
                res.metrics.e_loss_kwh,
                res.metrics.v_d,
                res.metrics.f_r_tot_kwh,
                if res.feasible { "" } else { " (penalized)" }
            )),
            Err(e) => {
                lines.push(format!("cap {:>5}%: failed: {e}", row.gamma_cap_pct));
                failed.push(e.clone());
            }
        }
    }
    if failed.len() == results.len() {
        return Err(CliError::Model(failed.swap_remove(0)));
    }
    Ok(lines)
}

#[derive(Debug, Clone)]
pub struct MonteCarloOptions {
    /// Inclusive; `None` means `1..=candidates`.
    pub s_range: Option<(usize, usize)>,
    pub trials: usize,
    pub beta_min: f64,
    pub seed: u64,
}

/// Writes `records.csv` and `records_plans.json`.
pub fn cmd_montecarlo(study: &Study, opts: &MonteCarloOptions, out: &Path) -> CliResult<Vec<String>> {
    let n = study.candidates().len();
    let (lo, hi) = opts.s_range.unwrap_or((1, n));
    if lo > hi {
        return Err(CliError::Usage(format!("empty S range {lo}:{hi}")));
    }
    let config = MonteCarloConfig {
        s_values: (lo..=hi).collect(),
        trials_per_s: opts.trials,
        beta_min: opts.beta_min,
        seed: opts.seed,
        sweep: SweepSettings::default(),
    };
    let set = run_trials(study, &config)?;
    let rows: Vec<RecordRow> = set.records.iter().map(RecordRow::from).collect();
    let plans: Vec<_> = set.records.iter().map(|r| trial_plan(r, study)).collect();
    ensure_dir(out)?;
    write_csv(&out.join("records.csv"), &rows)?;
    write_json(&out.join("records_plans.json"), &plans)?;
    Ok(vec![format!(
        "{} trials (S = {lo}..={hi}, {} per S, beta_min {}), {} diverged",
        rows.len(),
        opts.trials,
        opts.beta_min,
        set.diverged
    )])
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub records: PathBuf,
    pub optimal: Option<PathBuf>,
    pub bin_width_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Vertex of the fit, or `None` for a non-convex fit.
    pub gamma_star: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum FitEntry {
    Fit(FitSummary),
    Refused { error: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct PdfSummary {
    pub bin_lower_pct: f64,
    pub bin_upper_pct: f64,
    pub n_samples: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub skewness: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitsFile {
    /// Fits take γ as a fraction of peak load.
    pub gamma_unit: &'static str,
    pub v_d: FitEntry,
    pub e_loss: FitEntry,
    pub pdf_v_d: Vec<PdfSummary>,
    pub pdf_e_loss: Vec<PdfSummary>,
}

fn fit_entry(points: &[(f64, f64)]) -> (FitEntry, Option<FitResult>) {
    match fit_quadratic(points) {
        Ok(f) => (
            FitEntry::Fit(FitSummary {
                a2: f.a2,
                a1: f.a1,
                a0: f.a0,
                r_squared: f.r_squared,
                n_points: f.n_points,
                gamma_min: f.x_min,
                gamma_max: f.x_max,
                gamma_star: find_minimum_gamma(&f).ok(),
            }),
            Some(f),
        ),
        Err(e) => (FitEntry::Refused { error: e.to_string() }, None),
    }
}

/// Samples at γ values in the fitted range, in percent.
fn fit_curve(fit: &FitResult, steps: usize) -> Vec<SeriesRow> {
    (0..=steps)
        .map(|k| {
            let x = fit.x_min + (fit.x_max - fit.x_min) * k as f64 / steps as f64;
            SeriesRow { gamma_pct: 100.0 * x, value: fit.eval(x), source: "random-fit".into() }
        })
        .collect()
}

fn bin_label(lower: f64, upper: f64) -> String {
    format!("{lower}-{upper}")
}

/// Figure data and fits from a records file and an optional optimal sweep.
pub fn cmd_analyze(opts: &AnalyzeOptions, out: &Path) -> CliResult<Vec<String>> {
    let records: Vec<RecordRow> = read_csv(&opts.records)?;
    let metrics: Vec<ImpactMetrics> = records.iter().filter_map(RecordRow::metrics).collect();
    if metrics.is_empty() {
        return Err(CliError::Usage(format!("{}: no converged records", opts.records.display())));
    }
    let optimal: Vec<OptimalRow> = match &opts.optimal {
        Some(p) => read_csv(p)?,
        None => Vec::new(),
    };
    ensure_dir(out)?;
    let mut lines = Vec::new();

    let scatter: Vec<ScatterRow> = records
        .iter()
        .filter_map(|r| Some(ScatterRow { trial_id: r.trial_id, gamma_pct: r.gamma_pct, f_r_tot_kwh: r.f_r_tot_kwh? }))
        .collect();
    write_csv(&out.join("fig3_scatter.csv"), &scatter)?;
    let bins = bin_by_gamma(&metrics, opts.bin_width_pct)?;
    write_csv(&out.join("fig3_binned.csv"), &bins.iter().map(BinnedRow::from).collect::<Vec<_>>())?;

    let pts = |f: fn(&ImpactMetrics) -> f64| -> Vec<(f64, f64)> {
        metrics.iter().map(|m| (m.gamma_pct / 100.0, f(m))).collect()
    };
    let (v_entry, v_fit) = fit_entry(&pts(|m| m.v_d));
    let (e_entry, e_fit) = fit_entry(&pts(|m| m.e_loss_kwh));

    let figure = |name: &str, fit: Option<FitResult>, bin_mean: fn(&pvdg_core::GammaBin) -> f64, opt: fn(&OptimalRow) -> Option<f64>| {
        let mut rows: Vec<SeriesRow> = optimal
            .iter()
            .filter_map(|r| Some(SeriesRow { gamma_pct: r.gamma_pct?, value: opt(r)?, source: "optimal".into() }))
            .collect();
        if let Some(f) = fit {
            rows.extend(fit_curve(&f, 100));
        }
        rows.extend(bins.iter().map(|b| SeriesRow {
            gamma_pct: b.gamma_pct.mean,
            value: bin_mean(b),
            source: "random-mean".into(),
        }));
        write_csv(&out.join(name), &rows)
    };
    figure("fig4_voltage.csv", v_fit, |b| b.v_d.mean, |r| r.v_d)?;
    figure("fig6_loss.csv", e_fit, |b| b.e_loss_kwh.mean, |r| r.e_loss_kwh)?;

    let mut pdf_v = Vec::new();
    let mut pdf_e = Vec::new();
    for b in &bins {
        let members: Vec<&ImpactMetrics> = metrics
            .iter()
            .filter(|m| analysis::bin_index(m.gamma_pct, opts.bin_width_pct) == b.index)
            .collect();
        let label = bin_label(b.lower_pct, b.upper_pct);
        for (prefix, values, summaries) in [
            ("fig5_pdf", members.iter().map(|m| m.v_d).collect::<Vec<_>>(), &mut pdf_v),
            ("fig7_pdf", members.iter().map(|m| m.e_loss_kwh).collect::<Vec<_>>(), &mut pdf_e),
        ] {
            match empirical_pdf(&values, BinRule::default()) {
                Ok(pdf) => {
                    write_csv(&out.join(format!("{prefix}_{label}.csv")), &pdf_rows(&pdf))?;
                    summaries.push(pdf_summary(b, &pdf));
                }
                Err(e) => lines.push(format!("{prefix} bin {label}: skipped: {e}")),
            }
        }
    }

    for (name, entry) in [("v_D", &v_entry), ("E_loss", &e_entry)] {
        match entry {
            FitEntry::Fit(f) => {
                lines.push(format!(
                    "{name} fit: a2 = {:?}, a1 = {:?}, a0 = {:?}, r^2 = {:?}",
                    f.a2, f.a1, f.a0, f.r_squared
                ));
                match f.gamma_star {
                    Some(g) => lines.push(format!("{name} minimum at gamma* = {g:?} ({:.2}%)", 100.0 * g)),
                    None => lines.push(format!("{name} fit is not convex; no interior minimum")),
                }
            }
            FitEntry::Refused { error } => lines.push(format!("{name} fit refused: {error}")),
        }
    }
    write_json(
        &out.join("fits.json"),
        &FitsFile { gamma_unit: "fraction", v_d: v_entry, e_loss: e_entry, pdf_v_d: pdf_v, pdf_e_loss: pdf_e },
    )?;
    lines.insert(0, format!("{} records, {} bins of width {}%", metrics.len(), bins.len(), opts.bin_width_pct));
    Ok(lines)
}

fn pdf_summary(b: &pvdg_core::GammaBin, pdf: &EmpiricalPdf) -> PdfSummary {
    PdfSummary {
        bin_lower_pct: b.lower_pct,
        bin_upper_pct: b.upper_pct,
        n_samples: pdf.n_samples,
        mean: pdf.mean,
        std_dev: pdf.std_dev,
        skewness: pdf.skewness,
    }
}
