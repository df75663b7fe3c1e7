use crate::game::GameError;
use crate::partition::PartitionError;

/// Errors raised by the abstraction solvers and generators.
#[derive(Debug, thiserror::Error)]
pub enum MlaError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("state {state} lies in the lookup region but has no local value")]
    ForeignStateInRegionLookup { state: usize },
    #[error("valuation has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("region {region} did not converge after {sweeps} sweeps (residual {residual:e})")]
    RegionNoConvergence {
        region: usize,
        sweeps: usize,
        residual: f64,
    },
    #[error("global iteration did not converge after {sweeps} sweeps (residual {residual:e}, worst region {region})")]
    GlobalNoConvergence {
        sweeps: usize,
        residual: f64,
        region: usize,
    },
    #[error("outer loop stopped after {0} rounds")]
    RoundLimitExceeded(usize),
    #[error("bisection stopped after {steps} probes with interval [{lo}, {hi}]")]
    ProbeBudgetExceeded { steps: usize, lo: f64, hi: f64 },
    #[error("graph has player-2 states, expected an MDP")]
    NotAnMdp,
    #[error("parameter out of range: {0}")]
    ParamOutOfRange(String),
    #[error("model would have {states} states, above the cap of {cap}")]
    StateSpaceTooLarge { states: u64, cap: u64 },
}

pub type Result<T, E = MlaError> = std::result::Result<T, E>;
