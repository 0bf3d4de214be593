mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pvdg::io::{plan_to_file, write_json};
use pvdg::output::{MetricsRow, RecordRow};
use pvdg_core::{solve_series, ImpactMetrics, InstallationPlan, SweepSettings};

fn pvdg(fixture: &str, args: &[&str]) -> Output {
    let p = common::paths(fixture);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pvdg"));
    cmd.args(args);
    if !matches!(args.first(), Some(&"analyze")) {
        cmd.arg("--network").arg(&p.network).arg("--profiles").arg(&p.profiles).arg("--solar").arg(&p.solar);
    }
    cmd.output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_owned()
}

#[test]
fn validate_reports_counts() {
    let o = pvdg("ieee33", &["validate"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("33 buses, 32 lines, radial: ok"));
}

#[test]
fn validate_rejects_cyclic_and_dangling() {
    let three = common::paths("three_bus");
    for (flag, file) in [("--network", "cyclic/network.json"), ("--solar", "dangling_solar/solar.json")] {
        let mut args = vec!["validate".to_string()];
        for (f, p) in [("--network", &three.network), ("--profiles", &three.profiles), ("--solar", &three.solar)] {
            args.push(f.into());
            args.push(if f == flag { common::fixture(file) } else { p.clone() }.to_string_lossy().into_owned());
        }
        let o = Command::new(env!("CARGO_BIN_EXE_pvdg")).args(&args).output().unwrap();
        assert_eq!(o.status.code(), Some(1), "{file}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn missing_input_exits_3() {
    let o = Command::new(env!("CARGO_BIN_EXE_pvdg"))
        .args(["validate", "--network", "/nonexistent/n.json", "--profiles", "x", "--solar", "y"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn empty_plan_matches_no_plan() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let plan = common::fixture("empty_plan").join("plan.json");
    assert!(pvdg("ieee33", &["powerflow", "--out", &out_arg(a.path())]).status.success());
    assert!(pvdg("ieee33", &["powerflow", "--plan", plan.to_str().unwrap(), "--out", &out_arg(b.path())]).status.success());
    for f in ["powerflow_metrics.csv", "powerflow_voltages.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let rows: Vec<MetricsRow> = pvdg::output::read_csv(&a.path().join("powerflow_metrics.csv")).unwrap();
    assert_eq!(rows[0].f_r_tot_kwh, 0.0);
}

#[test]
fn full_plan_matches_library() {
    let study = common::study("ieee33");
    let plan = InstallationPlan::at_caps(study.candidates());
    let dir = tempfile::tempdir().unwrap();
    let plan_path = dir.path().join("plan.json");
    write_json(&plan_path, &plan_to_file(&plan, &study)).unwrap();
    let o = pvdg("ieee33", &["powerflow", "--plan", plan_path.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let sol = solve_series(&study, &plan, &SweepSettings::default()).unwrap();
    let lib = ImpactMetrics::evaluate(&study, &plan, &sol).unwrap();
    let lib_path = dir.path().join("lib.csv");
    pvdg::output::write_csv(&lib_path, &[MetricsRow::from(lib)]).unwrap();
    assert_eq!(fs::read(lib_path).unwrap(), fs::read(dir.path().join("powerflow_metrics.csv")).unwrap());
}

#[test]
fn montecarlo_single_baseline_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvdg("ieee33", &["montecarlo", "--trials", "1", "--s-range", "0:0", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("0 diverged"));
    let rows: Vec<RecordRow> = pvdg::output::read_csv(&dir.path().join("records.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].gamma_pct, 0.0);
    assert_eq!(rows[0].f_r_tot_kwh, Some(0.0));
}

#[test]
fn montecarlo_beta_one_fills_caps() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvdg("toy5", &["montecarlo", "--trials", "3", "--beta-min", "1.0", "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let plans: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("records_plans.json")).unwrap()).unwrap();
    let study = common::study("toy5");
    for p in plans.as_array().unwrap() {
        for inst in p["installations"].as_array().unwrap() {
            let bus = inst["bus"].as_u64().unwrap() as u32;
            let cap = study.candidates().iter().find(|c| c.bus.0 == bus).unwrap().p_max_kw;
            assert_eq!(inst["kw"].as_f64().unwrap(), cap);
        }
    }
}

#[test]
fn optimize_zero_gamma_is_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvdg("toy5", &["optimize", "--gamma-list", "0", "--iters", "5", "--swarm", "4", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<pvdg::output::OptimalRow> = pvdg::output::read_csv(&dir.path().join("optimal.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].gamma_pct, Some(0.0));
    assert_eq!(rows[0].f_r_tot_kwh, Some(0.0));
}

#[test]
fn optimize_rejects_bad_arguments() {
    let dir = tempfile::tempdir().unwrap();
    let o = pvdg("toy5", &["optimize", "--gamma-list", "5:x:9", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let o = pvdg("toy5", &["optimize", "--mode", "loss", "--omega", "3", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let o = pvdg("toy5", &["optimize", "--gamma-list", "150", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analyze_from_single_bin_refuses_fit_but_emits_pdfs() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<RecordRow> = (0..40)
        .map(|k| RecordRow {
            trial_id: k,
            seed: k as u64,
            s: 1,
            gamma_pct: 12.0,
            e_loss_kwh: Some(100.0 + (k % 7) as f64),
            v_d: Some(0.01 + 1e-4 * (k % 5) as f64),
            f_r_tot_kwh: Some(0.0),
            diverged: false,
        })
        .collect();
    let records = dir.path().join("records.csv");
    pvdg::output::write_csv(&records, &rows).unwrap();
    let o = pvdg("toy5", &["analyze", "--records", records.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("fit refused"));
    assert!(dir.path().join("fig5_pdf_10-15.csv").exists());
    assert!(dir.path().join("fig7_pdf_10-15.csv").exists());
}

#[test]
fn analyze_recovers_synthetic_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<RecordRow> = (0..=70)
        .map(|k| {
            let g = k as f64 / 100.0;
            RecordRow {
                trial_id: k,
                seed: 0,
                s: 1,
                gamma_pct: k as f64,
                e_loss_kwh: Some(0.0),
                v_d: Some(0.012 * g * g - 0.01 * g + 0.023),
                f_r_tot_kwh: Some(0.0),
                diverged: false,
            }
        })
        .collect();
    let records = dir.path().join("records.csv");
    pvdg::output::write_csv(&records, &rows).unwrap();
    let o = pvdg("toy5", &["analyze", "--records", records.to_str().unwrap(), "--out", &out_arg(dir.path())]);
    assert!(o.status.success());
    let fits: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("fits.json")).unwrap()).unwrap();
    let v = &fits["v_d"];
    for (key, want) in [("a2", 0.012), ("a1", -0.01), ("a0", 0.023)] {
        assert!((v[key].as_f64().unwrap() - want).abs() <= 1e-9, "{key}");
    }
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("v_D fit")).unwrap();
    let printed: Vec<f64> = line
        .split(", ")
        .map(|kv| kv.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    for (got, want) in printed.iter().zip([0.012, -0.01, 0.023, 1.0]) {
        assert!((got - want).abs() <= 1e-9, "{line}");
    }
}
