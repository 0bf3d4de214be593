#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use num_complex::Complex64;
use pvdg::io::{load_study, StudyPaths};
use pvdg_core::powerflow::net_injections;
use pvdg_core::{
    evaluate_objective, repair_plan, solve_series, InstallationPlan, OptimizerConfig, PowerFlowSolution,
    Study, SweepSettings,
};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn paths(name: &str) -> StudyPaths {
    let dir = fixture(name);
    StudyPaths { network: dir.join("network.json"), profiles: dir.join("profiles.json"), solar: dir.join("solar.json") }
}

pub fn study(name: &str) -> Study {
    load_study(&paths(name)).unwrap()
}

/// Dense admittance matrix assembled directly from the line list.
pub fn admittance(study: &Study) -> Vec<Vec<Complex64>> {
    let net = study.network();
    let n = net.bus_count();
    let z_base = net.base_kv() * net.base_kv() / net.base_mva();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for line in net.lines() {
        let a = net.bus_index(line.from_bus).unwrap();
        let b = net.bus_index(line.to_bus).unwrap();
        let yl = Complex64::new(1.0, 0.0) / Complex64::new(line.resistance_ohm / z_base, line.reactance_ohm / z_base);
        y[a][a] += yl;
        y[b][b] += yl;
        y[a][b] -= yl;
        y[b][a] -= yl;
    }
    y
}

fn currents(y: &[Vec<Complex64>], v: &[Complex64]) -> Vec<Complex64> {
    y.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Largest |S_injected − V·conj(Y·V)| over non-slack buses, pu.
pub fn max_mismatch(y: &[Vec<Complex64>], v: &[Complex64], injections: &[Complex64], slack: usize) -> f64 {
    let i = currents(y, v);
    (0..v.len())
        .filter(|&k| k != slack)
        .map(|k| (v[k] * i[k].conj() - injections[k]).norm())
        .fold(0.0, f64::max)
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let p = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, p);
        b.swap(col, p);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Newton–Raphson on rectangular voltage components with the slack held at 1∠0.
pub fn newton(y: &[Vec<Complex64>], injections: &[Complex64], slack: usize) -> Vec<Complex64> {
    let n = injections.len();
    let unknown: Vec<usize> = (0..n).filter(|&k| k != slack).collect();
    let m = unknown.len();
    let mut v = vec![Complex64::new(1.0, 0.0); n];
    for _ in 0..50 {
        let cur = currents(y, &v);
        let f: Vec<Complex64> = unknown.iter().map(|&i| v[i] * cur[i].conj() - injections[i]).collect();
        if f.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-13 {
            break;
        }
        let mut jac = vec![vec![0.0; 2 * m]; 2 * m];
        for (r, &i) in unknown.iter().enumerate() {
            for (c, &k) in unknown.iter().enumerate() {
                let mut de = v[i] * y[i][k].conj();
                let mut df = -Complex64::i() * v[i] * y[i][k].conj();
                if i == k {
                    de += cur[i].conj();
                    df += Complex64::i() * cur[i].conj();
                }
                jac[2 * r][2 * c] = de.re;
                jac[2 * r + 1][2 * c] = de.im;
                jac[2 * r][2 * c + 1] = df.re;
                jac[2 * r + 1][2 * c + 1] = df.im;
            }
        }
        let rhs: Vec<f64> = f.iter().flat_map(|z| [-z.re, -z.im]).collect();
        let dx = solve_dense(jac, rhs);
        for (c, &k) in unknown.iter().enumerate() {
            v[k] += Complex64::new(dx[2 * c], dx[2 * c + 1]);
        }
    }
    v
}

pub struct SeriesCheck {
    pub max_mismatch: f64,
    pub max_newton_diff: f64,
}

/// Compares the library sweep with mismatch and Newton oracles at every hour.
pub fn check_series(study: &Study, plan: &InstallationPlan) -> (PowerFlowSolution, SeriesCheck) {
    let y = admittance(study);
    let slack = study.network().slack_index();
    let sol = solve_series(study, plan, &SweepSettings::default()).unwrap();
    let inj = net_injections(study, plan).unwrap();
    let mut check = SeriesCheck { max_mismatch: 0.0, max_newton_diff: 0.0 };
    for (t, s) in inj.iter().enumerate() {
        check.max_mismatch = check.max_mismatch.max(max_mismatch(&y, &sol.v[t], s, slack));
        let reference = newton(&y, s, slack);
        let diff = reference.iter().zip(&sol.v[t]).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        check.max_newton_diff = check.max_newton_diff.max(diff);
    }
    (sol, check)
}

/// Best objective over every plan with capacities in `{0, cap/2, cap}`.
pub fn exhaustive_three_level(study: &Study, config: &OptimizerConfig) -> f64 {
    let caps: Vec<f64> = study.candidates().iter().map(|c| c.p_max_kw).collect();
    let n = caps.len();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(n as u32) {
        let mut k = code;
        let raw: Vec<f64> = caps
            .iter()
            .map(|&c| {
                let level = k % 3;
                k /= 3;
                c * level as f64 / 2.0
            })
            .collect();
        let plan = repair_plan(
            &raw,
            study.candidates(),
            config.gamma_cap_pct,
            study.peak_load_kw(),
            config.location_threshold_kw,
        );
        best = best.min(evaluate_objective(&plan, study, config).objective);
    }
    best
}
