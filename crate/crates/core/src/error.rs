use alloc::string::String;

use crate::network::BusId;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("network must contain exactly one slack bus, found {0}")]
    SlackCount(usize),
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("duplicate line id {0}")]
    DuplicateLine(u32),
    #[error("dangling reference: {what} `{reference}` does not exist")]
    DanglingReference { what: &'static str, reference: String },
    #[error("non-radial topology: {0}")]
    NonRadial(String),
    #[error("line {line} runs from {from} to {to}, which points towards the slack bus")]
    LineOrientation { line: u32, from: BusId, to: BusId },
    #[error("line {0} has zero series impedance")]
    ZeroImpedance(u32),
    #[error("invalid value for {field}: {reason}")]
    InvalidValue { field: String, reason: String },
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("power flow did not converge after {sweeps} sweeps (worst voltage update {worst_update:.3e} pu)")]
    NonConvergence { sweeps: usize, worst_update: f64 },
    #[error("voltage collapse: |v| = {magnitude:.4} pu at bus {bus}")]
    VoltageCollapse { bus: BusId, magnitude: f64 },
    #[error("timestep {timestep}: {source}")]
    Timestep {
        timestep: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("no evaluated plan produced a convergent power flow")]
    NoConvergentPlan,
    #[error("solution is not converged at timestep {0}")]
    Unconverged(usize),
    #[error("peak load is zero")]
    ZeroPeakLoad,
    #[error("configuration: {0}")]
    Config(String),
    #[error("rank deficient fit: need at least 3 distinct abscissae, found {0}")]
    RankDeficient(usize),
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("fit is not convex (a2 = {0})")]
    NonConvex(f64),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidValue { field: field.into(), reason: reason.into() }
    }

    /// True for failures of the numerical solver rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. }
            | Error::VoltageCollapse { .. }
            | Error::Unconverged(_)
            | Error::NoConvergentPlan => {
                true
            }
            Error::Timestep { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
