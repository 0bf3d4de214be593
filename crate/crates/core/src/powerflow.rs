//! Backward/forward sweep AC power flow for radial feeders.
//!
//! Loads are constant power. The slack bus is held at 1.0∠0 pu. Each sweep
//! accumulates branch currents from the leaves towards the slack, then
//! updates child voltages `V_child = V_parent − z·I_branch` from the slack
//! outwards. Iteration stops once the largest voltage update is below the
//! tolerance.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::math;
use crate::network::{Network, Study};
use crate::pv::{pv_profile, InstallationPlan};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSettings {
    /// Convergence threshold on max |ΔV| between sweeps, pu.
    pub tolerance: f64,
    pub max_sweeps: usize,
    /// Any |v| below this mid-iteration is reported as voltage collapse.
    pub collapse_threshold: f64,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings { tolerance: 1e-8, max_sweeps: 100, collapse_threshold: 0.5 }
    }
}

/// Converged state of one timestep, per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestepSolution {
    /// Bus voltages, indexed by bus position.
    pub v: Vec<Complex64>,
    /// Branch currents parent to child, indexed by line position.
    pub i_line: Vec<Complex64>,
    /// Real power entering each line at its parent end.
    pub p_line_from: Vec<f64>,
    pub iterations: usize,
}

/// Solve one timestep.
///
/// `net_injections_pu[b]` is generation minus load at bus `b`; the slack
/// entry is ignored because the slack absorbs the residual.
pub fn solve_timestep(
    network: &Network,
    net_injections_pu: &[Complex64],
    settings: &SweepSettings,
) -> Result<TimestepSolution> {
    let n = network.bus_count();
    if net_injections_pu.len() != n {
        return Err(Error::DimensionMismatch {
            what: "net injections",
            expected: n,
            actual: net_injections_pu.len(),
        });
    }
    let order = network.radial_order();
    let z = network.line_impedance_pu();
    let slack = network.slack_index();

    let mut v = vec![ONE; n];
    let mut i_line = vec![ZERO; network.lines().len()];
    let mut subtree = vec![ZERO; n];

    let mut iterations = 0;
    let mut worst = f64::INFINITY;
    while iterations < settings.max_sweeps {
        iterations += 1;
        backward(network, net_injections_pu, &v, &mut subtree, &mut i_line);

        worst = 0.0;
        for &b in &order.buses[1..] {
            let (p, li) = match (order.parent[b], order.parent_line[b]) {
                (Some(p), Some(li)) => (p, li),
                _ => unreachable!("non-slack bus has a parent"),
            };
            let updated = v[p] - z[li] * i_line[li];
            let magnitude = math::abs(updated);
            if !(magnitude >= settings.collapse_threshold) {
                return Err(Error::VoltageCollapse { bus: network.buses()[b].id, magnitude });
            }
            let delta = math::abs(updated - v[b]);
            if delta > worst {
                worst = delta;
            }
            v[b] = updated;
        }
        if worst <= settings.tolerance {
            break;
        }
    }
    if !(worst <= settings.tolerance) {
        return Err(Error::NonConvergence { sweeps: iterations, worst_update: worst });
    }
    debug_assert_eq!(v[slack], ONE);

    // currents consistent with the final voltages
    backward(network, net_injections_pu, &v, &mut subtree, &mut i_line);
    let p_line_from = network
        .lines()
        .iter()
        .zip(&i_line)
        .map(|(line, i)| {
            let parent = network.bus_index(line.from_bus).expect("validated endpoint");
            (v[parent] * i.conj()).re
        })
        .collect();

    Ok(TimestepSolution { v, i_line, p_line_from, iterations })
}

fn backward(
    network: &Network,
    injections: &[Complex64],
    v: &[Complex64],
    subtree: &mut [Complex64],
    i_line: &mut [Complex64],
) {
    let order = network.radial_order();
    subtree.fill(ZERO);
    for &b in order.buses[1..].iter().rev() {
        // current drawn by the bus itself
        subtree[b] += (-injections[b] / v[b]).conj();
        let (p, li) = match (order.parent[b], order.parent_line[b]) {
            (Some(p), Some(li)) => (p, li),
            _ => unreachable!("non-slack bus has a parent"),
        };
        i_line[li] = subtree[b];
        let drawn = subtree[b];
        subtree[p] += drawn;
    }
}

/// Time series of solved states.
///
/// All per-timestep vectors are stored time-major: `v[t][bus]`,
/// `i_line[t][line]`, `p_line_from[t][line]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerFlowSolution {
    pub v: Vec<Vec<Complex64>>,
    pub i_line: Vec<Vec<Complex64>>,
    pub p_line_from: Vec<Vec<f64>>,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
}

impl PowerFlowSolution {
    pub fn horizon(&self) -> usize {
        self.converged.len()
    }

    pub fn from_timesteps(steps: Vec<TimestepSolution>) -> Self {
        let mut sol = PowerFlowSolution {
            v: Vec::with_capacity(steps.len()),
            i_line: Vec::with_capacity(steps.len()),
            p_line_from: Vec::with_capacity(steps.len()),
            converged: vec![true; steps.len()],
            iterations: Vec::with_capacity(steps.len()),
        };
        for s in steps {
            sol.v.push(s.v);
            sol.i_line.push(s.i_line);
            sol.p_line_from.push(s.p_line_from);
            sol.iterations.push(s.iterations);
        }
        sol
    }

    /// First timestep that is not converged.
    pub fn first_unconverged(&self) -> Option<usize> {
        self.converged.iter().position(|c| !c)
    }

    pub fn ensure_converged(&self) -> Result<()> {
        match self.first_unconverged() {
            Some(t) => Err(Error::Unconverged(t)),
            None => Ok(()),
        }
    }

    /// Minimum and maximum voltage magnitude over all buses and timesteps.
    pub fn voltage_range(&self) -> (f64, f64) {
        self.v.iter().flatten().map(|&v| math::abs(v)).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), m| (lo.min(m), hi.max(m)),
        )
    }
}

/// Net injection (PV minus demand) of every bus at each timestep, per-unit.
pub fn net_injections(study: &Study, plan: &InstallationPlan) -> Result<Vec<Vec<Complex64>>> {
    plan.validate(study.candidates())?;
    let pv = pv_profile(plan, study.insolation())?;
    let kw_per_pu = study.network().kw_per_pu();
    let out = (0..study.horizon())
        .map(|t| {
            let mut row: Vec<Complex64> = study.demand_pu(t).iter().map(|d| -d).collect();
            for (i, series) in pv.p_kw.iter().enumerate() {
                if plan.locations[i] {
                    row[study.candidate_bus_index(i)] += Complex64::new(series[t] / kw_per_pu, 0.0);
                }
            }
            row
        })
        .collect();
    Ok(out)
}

/// Daily time-series power flow for one installation plan.
pub fn solve_series(
    study: &Study,
    plan: &InstallationPlan,
    settings: &SweepSettings,
) -> Result<PowerFlowSolution> {
    let injections = net_injections(study, plan)?;
    let steps = injections
        .iter()
        .enumerate()
        .map(|(t, inj)| {
            solve_timestep(study.network(), inj, settings)
                .map_err(|e| Error::Timestep { timestep: t, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerFlowSolution::from_timesteps(steps))
}
