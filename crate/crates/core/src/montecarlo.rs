//! Randomized customer-driven PV installations.
//!
//! A trial picks `S` solar-ready buses uniformly without replacement, draws
//! a size factor β ~ U[β_min, 1] for each picked bus, installs `y_i·β_i`,
//! then runs the daily power flow and scores the four impact metrics.
//! Every trial owns an RNG stream derived from the master seed, `S` and the
//! trial index, so results do not depend on execution order.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{penetration_ratio, ImpactMetrics};
use crate::network::{SolarReadyBus, Study};
use crate::powerflow::{solve_series, SweepSettings};
use crate::pv::InstallationPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub s_values: Vec<usize>,
    pub trials_per_s: usize,
    pub beta_min: f64,
    pub seed: u64,
    pub sweep: SweepSettings,
}

impl MonteCarloConfig {
    /// `S = 1..=candidates`, 200 trials each, β_min = 0.8.
    pub fn full_range(candidates: usize, seed: u64) -> Self {
        MonteCarloConfig {
            s_values: (1..=candidates).collect(),
            trials_per_s: 200,
            beta_min: 0.8,
            seed,
            sweep: SweepSettings::default(),
        }
    }

    pub fn validate(&self, candidates: usize) -> Result<()> {
        if self.trials_per_s == 0 {
            return Err(Error::Config("trials_per_s must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.beta_min) {
            return Err(Error::Config(format!("beta_min must lie in [0, 1], got {}", self.beta_min)));
        }
        if let Some(&s) = self.s_values.iter().find(|&&s| s > candidates) {
            return Err(Error::Config(format!("S = {s} exceeds the {candidates} solar-ready buses")));
        }
        Ok(())
    }
}

/// Child seed of trial `trial` at installation count `s`.
pub fn trial_seed(master: u64, s: usize, trial: usize) -> u64 {
    let mut z = splitmix(master ^ splitmix(s as u64));
    z ^= splitmix(trial as u64 ^ 0xA076_1D64_78BD_642F);
    splitmix(z)
}

fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanSample {
    /// Selection vector over candidates; exactly `s` entries are set.
    pub selected: Vec<bool>,
    /// Size factor per candidate; 0 where not selected.
    pub beta: Vec<f64>,
    pub plan: InstallationPlan,
}

/// Draw one random installation of `s` buses.
pub fn sample_plan<R: Rng + ?Sized>(
    rng: &mut R,
    s: usize,
    candidates: &[SolarReadyBus],
    beta_min: f64,
) -> Result<PlanSample> {
    let n = candidates.len();
    if s > n {
        return Err(Error::Config(format!("S = {s} exceeds the {n} solar-ready buses")));
    }
    if !(0.0..=1.0).contains(&beta_min) {
        return Err(Error::Config(format!("beta_min must lie in [0, 1], got {beta_min}")));
    }
    let mut picked = rand::seq::index::sample(rng, n, s).into_vec();
    picked.sort_unstable();

    let mut selected = vec![false; n];
    let mut beta = vec![0.0; n];
    for &i in &picked {
        selected[i] = true;
        beta[i] = beta_min + (1.0 - beta_min) * rng.random::<f64>();
    }
    let capacities = candidates.iter().zip(&beta).map(|(c, &b)| c.p_max_kw * b).collect();
    let plan = InstallationPlan { locations: selected.clone(), capacities_kw: capacities };
    Ok(PlanSample { selected, beta, plan })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrialRecord {
    pub trial_id: usize,
    pub seed: u64,
    pub s: usize,
    /// Index of the trial within its `s` group.
    pub trial_index: usize,
    pub selected: Vec<bool>,
    pub beta: Vec<f64>,
    pub plan: InstallationPlan,
    pub gamma_pct: f64,
    /// `None` when the power flow diverged.
    pub metrics: Option<ImpactMetrics>,
}

impl TrialRecord {
    pub fn diverged(&self) -> bool {
        self.metrics.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    /// Ordered by `s` (input order), then trial index.
    pub records: Vec<TrialRecord>,
    pub diverged: usize,
}

impl TrialSet {
    /// Metrics of every non-diverged trial.
    pub fn metrics(&self) -> Vec<ImpactMetrics> {
        self.records.iter().filter_map(|r| r.metrics).collect()
    }
}

fn run_one(study: &Study, config: &MonteCarloConfig, trial_id: usize, s: usize, k: usize) -> Result<TrialRecord> {
    let seed = trial_seed(config.seed, s, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = sample_plan(&mut rng, s, study.candidates(), config.beta_min)?;
    let gamma_pct = penetration_ratio(&sample.plan, study)?;
    let metrics = match solve_series(study, &sample.plan, &config.sweep) {
        Ok(solution) => Some(ImpactMetrics::evaluate(study, &sample.plan, &solution)?),
        Err(e) if e.is_numerical() => None,
        Err(e) => return Err(e),
    };
    Ok(TrialRecord {
        trial_id,
        seed,
        s,
        trial_index: k,
        selected: sample.selected,
        beta: sample.beta,
        plan: sample.plan,
        gamma_pct,
        metrics,
    })
}

/// Run every trial of the experiment.
pub fn run_trials(study: &Study, config: &MonteCarloConfig) -> Result<TrialSet> {
    config.validate(study.candidates().len())?;
    let jobs: Vec<(usize, usize)> = config
        .s_values
        .iter()
        .flat_map(|&s| (0..config.trials_per_s).map(move |k| (s, k)))
        .collect();

    #[cfg(feature = "parallel")]
    let iter = jobs.par_iter().enumerate();
    #[cfg(not(feature = "parallel"))]
    let iter = jobs.iter().enumerate();
    let records = iter
        .map(|(id, &(s, k))| run_one(study, config, id, s, k))
        .collect::<Result<Vec<_>>>()?;

    let diverged = records.iter().filter(|r| r.diverged()).count();
    Ok(TrialSet { records, diverged })
}
