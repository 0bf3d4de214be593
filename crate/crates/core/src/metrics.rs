//! Impact measures of one plan over one profile horizon.
//!
//! Solver quantities are per-unit; every reported energy is converted to
//! kWh with a fixed one-hour timestep.

use crate::error::{Error, Result};
use crate::math;
use crate::network::{Network, Study};
use crate::powerflow::PowerFlowSolution;
use crate::pv::InstallationPlan;

/// Duration of one profile timestep, hours.
pub const TIMESTEP_HOURS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImpactMetrics {
    pub gamma_pct: f64,
    pub e_loss_kwh: f64,
    pub v_d: f64,
    pub f_r_tot_kwh: f64,
}

impl ImpactMetrics {
    /// All four measures of `plan` given its solved time series.
    pub fn evaluate(study: &Study, plan: &InstallationPlan, solution: &PowerFlowSolution) -> Result<Self> {
        Ok(ImpactMetrics {
            gamma_pct: penetration_ratio(plan, study)?,
            e_loss_kwh: energy_loss(solution, study.network())?,
            v_d: voltage_deviation(solution)?,
            f_r_tot_kwh: reverse_flow(solution, study.network())?,
        })
    }
}

/// Installed capacity as a percentage of peak load.
pub fn penetration_pct(total_pv_kw: f64, peak_load_kw: f64) -> Result<f64> {
    if !(peak_load_kw > 0.0) {
        return Err(Error::ZeroPeakLoad);
    }
    Ok(100.0 * total_pv_kw / peak_load_kw)
}

/// Penetration ratio of a plan against the study's substation peak load.
pub fn penetration_ratio(plan: &InstallationPlan, study: &Study) -> Result<f64> {
    penetration_pct(plan.total_kw(), study.peak_load_kw())
}

/// Share of demand energy met by PV energy, percent.
pub fn energy_share_pct(pv_energy: f64, demand_energy: f64) -> Result<f64> {
    if !(demand_energy > 0.0) {
        return Err(Error::invalid("demand_energy", "must be positive"));
    }
    Ok(100.0 * pv_energy / demand_energy)
}

/// Σ_t Σ_l |i_l|²·R_l, kWh.
pub fn energy_loss(solution: &PowerFlowSolution, network: &Network) -> Result<f64> {
    solution.ensure_converged()?;
    let z = network.line_impedance_pu();
    let pu: f64 = solution
        .i_line
        .iter()
        .map(|step| step.iter().zip(z).map(|(i, z)| i.norm_sqr() * z.re).sum::<f64>())
        .sum();
    Ok(pu * TIMESTEP_HOURS * network.kw_per_pu())
}

/// Mean absolute deviation of |v| from 1 pu over all buses and timesteps.
pub fn voltage_deviation(solution: &PowerFlowSolution) -> Result<f64> {
    solution.ensure_converged()?;
    let mut total = 0.0;
    let mut count = 0usize;
    for step in &solution.v {
        for &v in step {
            let d = math::abs(v) - 1.0;
            total += if d < 0.0 { -d } else { d };
            count += 1;
        }
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / count as f64)
}

/// Real energy flowing back towards the substation, summed over lines, kWh.
pub fn reverse_flow(solution: &PowerFlowSolution, network: &Network) -> Result<f64> {
    solution.ensure_converged()?;
    let pu: f64 = solution
        .p_line_from
        .iter()
        .map(|step| step.iter().map(|&p| if p < 0.0 { -p } else { 0.0 }).sum::<f64>())
        .sum();
    Ok(pu * TIMESTEP_HOURS * network.kw_per_pu())
}
