use thiserror::Error;

use crate::topology::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network topology:\n{0}")]
    InvalidTopology(ValidationReport),
    #[error("valve index {index} out of range (network has {count} valves)")]
    ValveOutOfRange { index: usize, count: usize },
    #[error("control value {0} outside (0, 1]")]
    ControlOutOfRange(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("incidence matrix is singular")]
    SingularIncidence,
    #[error("flow solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    FlowResidual { residual: f64, tolerance: f64 },
    #[error(
        "inconsistent pressure state: valve {valve} implies p_beta = {implied}, \
         valve 0 implies {reference}"
    )]
    InconsistentPressures {
        valve: usize,
        implied: f64,
        reference: f64,
    },
    #[error(
        "differential pressure {dp} is infeasible: valve {valve} would need a setting of {setting} \
         (minimum feasible differential pressure is {required})"
    )]
    InfeasibleDifferentialPressure {
        dp: f64,
        valve: usize,
        setting: f64,
        required: f64,
    },
    #[error("boundary flow of valve {valve} is {value}; strictly positive flows are required")]
    NonPositiveBoundaryFlow { valve: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("regression system has no rows")]
    EmptySystem,
    #[error("singular value decomposition did not converge")]
    Decomposition,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
