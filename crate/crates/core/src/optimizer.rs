//! PV siting and sizing by global-best particle swarm optimization.
//!
//! The decision vector is the continuous capacity of every solar-ready bus.
//! Capacity ceilings and the penetration cap are enforced exactly by
//! [`repair_plan`], which is applied to every particle before evaluation and
//! written back to its position. The voltage band and the no-reverse-flow
//! condition depend on the power flow and enter the objective as penalties.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math;
use crate::metrics::ImpactMetrics;
use crate::network::{SolarReadyBus, Study};
use crate::powerflow::{solve_series, PowerFlowSolution, SweepSettings};
use crate::pv::InstallationPlan;

/// How energy loss and voltage deviation are combined.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum ObjectiveMode {
    /// `E_loss + ω·v_D`; ω = 0 is loss-only.
    Weighted(f64),
    /// `v_D` alone, the ω → ∞ limit.
    VoltageOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub gamma_cap_pct: f64,
    pub mode: ObjectiveMode,
    pub swarm_size: usize,
    pub max_iters: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Velocity limit as a fraction of each box width.
    pub velocity_fraction: f64,
    /// Objective units per pu·bus·hour outside the voltage band.
    pub penalty_voltage: f64,
    /// Objective units per kWh of reverse flow.
    pub penalty_reverse: f64,
    pub seed: u64,
    /// Installations below this size are pruned, kW.
    pub location_threshold_kw: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub sweep: SweepSettings,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            gamma_cap_pct: 70.0,
            mode: ObjectiveMode::Weighted(0.0),
            swarm_size: 50,
            max_iters: 200,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            velocity_fraction: 0.2,
            penalty_voltage: 1e4,
            penalty_reverse: 10.0,
            seed: 0,
            location_threshold_kw: 1.0,
            v_min: 0.95,
            v_max: 1.05,
            sweep: SweepSettings::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::Config(format!("swarm_size must be >= 2, got {}", self.swarm_size)));
        }
        if !(0.0..=100.0).contains(&self.gamma_cap_pct) {
            return Err(Error::Config(format!("gamma_cap_pct must lie in [0, 100], got {}", self.gamma_cap_pct)));
        }
        for (name, value) in [
            ("inertia", self.inertia),
            ("cognitive", self.cognitive),
            ("social", self.social),
            ("velocity_fraction", self.velocity_fraction),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        for (name, value) in [
            ("penalty_voltage", self.penalty_voltage),
            ("penalty_reverse", self.penalty_reverse),
            ("location_threshold_kw", self.location_threshold_kw),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Config(format!("{name} must be nonnegative, got {value}")));
            }
        }
        if let ObjectiveMode::Weighted(w) = self.mode {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("omega must be nonnegative, got {w}")));
            }
        }
        if !(self.v_min < self.v_max) {
            return Err(Error::Config("v_min must be below v_max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PenaltyBreakdown {
    /// Σ over bus-hours of the distance outside [v_min, v_max], pu·h.
    pub band_violation_pu_h: f64,
    pub reverse_kwh: f64,
    pub voltage: f64,
    pub reverse: f64,
}

impl PenaltyBreakdown {
    pub fn total(&self) -> f64 {
        self.voltage + self.reverse
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub penalties: PenaltyBreakdown,
    /// `None` when the power flow did not converge.
    pub metrics: Option<ImpactMetrics>,
}

fn band_violation(solution: &PowerFlowSolution, v_min: f64, v_max: f64) -> f64 {
    solution
        .v
        .iter()
        .flatten()
        .map(|&v| {
            let m = math::abs(v);
            if m > v_max {
                m - v_max
            } else if m < v_min {
                v_min - m
            } else {
                0.0
            }
        })
        .sum()
}

/// Penalized objective of a plan that already satisfies the capacity limits.
///
/// A power flow that fails to converge scores `+∞`.
pub fn evaluate_objective(plan: &InstallationPlan, study: &Study, config: &OptimizerConfig) -> Evaluation {
    let diverged = Evaluation {
        objective: f64::INFINITY,
        penalties: PenaltyBreakdown::default(),
        metrics: None,
    };
    let Ok(solution) = solve_series(study, plan, &config.sweep) else {
        return diverged;
    };
    let Ok(metrics) = ImpactMetrics::evaluate(study, plan, &solution) else {
        return diverged;
    };
    let band = band_violation(&solution, config.v_min, config.v_max);
    let penalties = PenaltyBreakdown {
        band_violation_pu_h: band,
        reverse_kwh: metrics.f_r_tot_kwh,
        voltage: config.penalty_voltage * band,
        reverse: config.penalty_reverse * metrics.f_r_tot_kwh,
    };
    let base = match config.mode {
        ObjectiveMode::Weighted(w) => metrics.e_loss_kwh + w * metrics.v_d,
        ObjectiveMode::VoltageOnly => metrics.v_d,
    };
    Evaluation { objective: base + penalties.total(), penalties, metrics: Some(metrics) }
}

/// Project raw capacities onto the installation constraints.
///
/// Each entry is clamped to `[0, p_max_kw]`, entries below the location
/// threshold are removed, then all entries are scaled by one common factor
/// if their total exceeds `gamma_cap_pct` of the peak load.
pub fn repair_plan(
    raw_capacities: &[f64],
    candidates: &[SolarReadyBus],
    gamma_cap_pct: f64,
    peak_load_kw: f64,
    location_threshold_kw: f64,
) -> InstallationPlan {
    let mut caps: Vec<f64> = raw_capacities
        .iter()
        .zip(candidates)
        .map(|(&raw, c)| {
            let x = if raw.is_nan() { 0.0 } else { raw.clamp(0.0, c.p_max_kw) };
            if x < location_threshold_kw { 0.0 } else { x }
        })
        .collect();
    let limit = gamma_cap_pct / 100.0 * peak_load_kw;
    let total: f64 = caps.iter().sum();
    if total > limit {
        if limit <= 0.0 {
            caps.fill(0.0);
        } else {
            let scale = limit / total;
            caps.iter_mut().for_each(|c| *c *= scale);
        }
    }
    InstallationPlan::from_capacities(caps)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizationResult {
    pub gamma_cap_pct: f64,
    pub mode: ObjectiveMode,
    pub plan: InstallationPlan,
    pub metrics: ImpactMetrics,
    pub objective_value: f64,
    pub penalties: PenaltyBreakdown,
    /// Global-best objective after each iteration.
    pub convergence_trace: Vec<f64>,
    pub feasible: bool,
    pub evaluations: usize,
}

/// Strict preference between two scored plans: lower objective, then
/// smaller installed total, then lexicographically smaller capacities.
fn precedes(a_obj: f64, a: &[f64], b_obj: f64, b: &[f64]) -> bool {
    match a_obj.partial_cmp(&b_obj) {
        Some(Ordering::Less) => return true,
        Some(Ordering::Greater) => return false,
        _ => {}
    }
    let (ta, tb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    match ta.partial_cmp(&tb) {
        Some(Ordering::Less) => return true,
        Some(Ordering::Greater) => return false,
        _ => {}
    }
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Less) => return true,
            Some(Ordering::Greater) => return false,
            _ => {}
        }
    }
    false
}

fn evaluate_all(plans: &[InstallationPlan], study: &Study, config: &OptimizerConfig) -> Vec<Evaluation> {
    #[cfg(feature = "parallel")]
    {
        plans.par_iter().map(|p| evaluate_objective(p, study, config)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        plans.iter().map(|p| evaluate_objective(p, study, config)).collect()
    }
}

fn result_from(
    config: &OptimizerConfig,
    plan: InstallationPlan,
    eval: Evaluation,
    convergence_trace: Vec<f64>,
    evaluations: usize,
) -> Result<OptimizationResult> {
    let metrics = eval.metrics.ok_or(Error::NoConvergentPlan)?;
    let feasible = eval.objective.is_finite()
        && eval.penalties.band_violation_pu_h == 0.0
        && eval.penalties.reverse_kwh == 0.0;
    Ok(OptimizationResult {
        gamma_cap_pct: config.gamma_cap_pct,
        mode: config.mode,
        plan,
        metrics,
        objective_value: eval.objective,
        penalties: eval.penalties,
        convergence_trace,
        feasible,
        evaluations,
    })
}

fn baseline_result(study: &Study, config: &OptimizerConfig) -> Result<OptimizationResult> {
    let plan = InstallationPlan::empty(study.candidates().len());
    let eval = evaluate_objective(&plan, study, config);
    let trace = alloc::vec![eval.objective];
    result_from(config, plan, eval, trace, 1)
}

/// Metrics of the study without any PV.
pub fn baseline_metrics(study: &Study, sweep: &SweepSettings) -> Result<ImpactMetrics> {
    let plan = InstallationPlan::empty(study.candidates().len());
    let solution = solve_series(study, &plan, sweep)?;
    ImpactMetrics::evaluate(study, &plan, &solution)
}

/// ω that gives energy loss and voltage deviation equal weight at zero
/// penetration: baseline `E_loss / v_D`.
pub fn default_omega(study: &Study, sweep: &SweepSettings) -> Result<f64> {
    let base = baseline_metrics(study, sweep)?;
    if !(base.v_d > 0.0) {
        return Err(Error::Config("baseline voltage deviation is zero; omega is undefined".into()));
    }
    Ok(base.e_loss_kwh / base.v_d)
}

/// Run the swarm for one penetration cap.
///
/// Particle 0 starts at the empty plan and particle 1 at every ceiling
/// (scaled to the cap); the rest start uniformly in the box. Evaluations
/// within an iteration may run concurrently; all random draws and best
/// updates happen sequentially, so the result depends only on the seed.
pub fn optimize(study: &Study, config: &OptimizerConfig) -> Result<OptimizationResult> {
    config.validate()?;
    let candidates = study.candidates();
    if candidates.is_empty() {
        return Err(Error::Config("solar-ready list is empty".into()));
    }
    if config.gamma_cap_pct == 0.0 {
        return baseline_result(study, config);
    }

    let dim = candidates.len();
    let upper: Vec<f64> = candidates.iter().map(|c| c.p_max_kw).collect();
    let vmax: Vec<f64> = upper.iter().map(|u| u * config.velocity_fraction).collect();
    let peak = study.peak_load_kw();
    let repair = |x: &[f64]| {
        repair_plan(x, candidates, config.gamma_cap_pct, peak, config.location_threshold_kw)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut positions: Vec<Vec<f64>> = (0..config.swarm_size)
        .map(|k| match k {
            0 => alloc::vec![0.0; dim],
            1 => upper.clone(),
            _ => upper.iter().map(|&u| u * rng.random::<f64>()).collect(),
        })
        .collect();
    let mut velocities: Vec<Vec<f64>> = (0..config.swarm_size)
        .map(|_| vmax.iter().map(|&m| m * (2.0 * rng.random::<f64>() - 1.0)).collect())
        .collect();

    let mut plans: Vec<InstallationPlan> = positions.iter().map(|x| repair(x)).collect();
    for (x, p) in positions.iter_mut().zip(&plans) {
        x.clone_from(&p.capacities_kw);
    }
    let mut evals = evaluate_all(&plans, study, config);
    let mut evaluations = plans.len();

    let mut personal: Vec<(f64, Vec<f64>)> =
        evals.iter().zip(&positions).map(|(e, x)| (e.objective, x.clone())).collect();
    let mut best_idx = 0;
    for k in 1..plans.len() {
        if precedes(evals[k].objective, &plans[k].capacities_kw, evals[best_idx].objective, &plans[best_idx].capacities_kw) {
            best_idx = k;
        }
    }
    let mut best_plan = plans[best_idx].clone();
    let mut best_eval = evals[best_idx].clone();

    let mut trace = Vec::with_capacity(config.max_iters);
    for _ in 0..config.max_iters {
        for k in 0..config.swarm_size {
            let (x, v) = (&mut positions[k], &mut velocities[k]);
            let pbest = &personal[k].1;
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                let mut vel = config.inertia * v[d]
                    + config.cognitive * r1 * (pbest[d] - x[d])
                    + config.social * r2 * (best_plan.capacities_kw[d] - x[d]);
                vel = vel.clamp(-vmax[d], vmax[d]);
                let mut next = x[d] + vel;
                if next < 0.0 {
                    next = -next;
                    vel = -vel;
                }
                if next > upper[d] {
                    next = 2.0 * upper[d] - next;
                    vel = -vel;
                }
                x[d] = next.clamp(0.0, upper[d]);
                v[d] = vel;
            }
        }
        plans = positions.iter().map(|x| repair(x)).collect();
        for (x, p) in positions.iter_mut().zip(&plans) {
            x.clone_from(&p.capacities_kw);
        }
        evals = evaluate_all(&plans, study, config);
        evaluations += plans.len();

        for k in 0..config.swarm_size {
            let e = &evals[k];
            if precedes(e.objective, &positions[k], personal[k].0, &personal[k].1) {
                personal[k] = (e.objective, positions[k].clone());
            }
            if precedes(e.objective, &plans[k].capacities_kw, best_eval.objective, &best_plan.capacities_kw) {
                best_plan = plans[k].clone();
                best_eval = e.clone();
            }
        }
        trace.push(best_eval.objective);
    }

    result_from(config, best_plan, best_eval, trace, evaluations)
}

/// One optimization per penetration cap, in input order.
///
/// Zero caps reuse a single baseline evaluation. A failure at one cap is
/// returned in its slot and does not stop the sweep.
pub fn sweep_optimal(
    study: &Study,
    gamma_list_pct: &[f64],
    config: &OptimizerConfig,
) -> Result<Vec<Result<OptimizationResult>>> {
    if gamma_list_pct.is_empty() {
        return Err(Error::Config("gamma list is empty".into()));
    }
    let mut baseline: Option<Result<OptimizationResult>> = None;
    let out = gamma_list_pct
        .iter()
        .map(|&gamma| {
            let cfg = OptimizerConfig { gamma_cap_pct: gamma, ..config.clone() };
            if gamma == 0.0 {
                cfg.validate()?;
                if study.candidates().is_empty() {
                    return Err(Error::Config("solar-ready list is empty".into()));
                }
                baseline.get_or_insert_with(|| baseline_result(study, &cfg)).clone()
            } else {
                optimize(study, &cfg)
            }
        })
        .collect();
    Ok(out)
}
