//! Photovoltaic distributed generation impact studies on radial feeders.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.
//! It carries the numerical side of a study:
//!
//! - [`network`]: feeder data model, validation, admittance matrix, radial traversal
//! - [`pv`]: installation plans and the irradiance-to-power map
//! - [`powerflow`]: backward/forward sweep AC power flow, single step and daily series
//! - [`metrics`]: penetration ratio, energy loss, voltage deviation, reverse flow
//! - [`optimizer`]: particle swarm siting/sizing under capacity and penetration limits
//! - [`montecarlo`]: randomized customer-driven installations
//! - [`analysis`]: penetration binning, quadratic fits, empirical PDFs
//!
//! File formats, the CLI and figure-data emission live in the `pvdg` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod analysis;
pub mod error;
mod math;
pub mod metrics;
pub mod montecarlo;
pub mod network;
pub mod optimizer;
pub mod powerflow;
pub mod pv;

pub use num_complex::Complex64;

pub use analysis::{
    bin_by_gamma, bin_index, empirical_pdf, find_minimum_gamma, fit_quadratic, BinRule, EmpiricalPdf,
    FitResult, GammaBin, MetricStats,
};
pub use error::{Error, Result};
pub use metrics::{
    energy_loss, energy_share_pct, penetration_pct, penetration_ratio, reverse_flow,
    voltage_deviation, ImpactMetrics,
};
pub use montecarlo::{run_trials, sample_plan, MonteCarloConfig, PlanSample, TrialRecord, TrialSet};
pub use network::{
    build_ybus, Bus, BusId, BusKind, InsolationProfile, Line, LoadProfile, Network, RadialOrder,
    SolarReadyBus, Study, YBus,
};
pub use optimizer::{
    evaluate_objective, optimize, repair_plan, sweep_optimal, Evaluation, ObjectiveMode,
    OptimizationResult, OptimizerConfig, PenaltyBreakdown,
};
pub use powerflow::{
    solve_series, solve_timestep, PowerFlowSolution, SweepSettings, TimestepSolution,
};
pub use pv::{pv_output, pv_profile, InstallationPlan, PvInjectionSeries};
