//! Steady-state hydraulics and grey-box resistance estimation for
//! tree-shaped district heating networks.
//!
//! Supply and return networks are mirrored trees joined by customer valves.
//! Given only the two reference pressures at the plant, the boundary flows and
//! the valve settings of several load conditions, the path equations through
//! every valve are linear in the edge resistances. Stacking them gives a
//! least-squares problem solved with the pseudoinverse; its numerical rank
//! tells whether the resistances are identifiable from the data.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common double-precision instantiations.

pub use nalgebra;

pub mod error;
pub mod estimation;
pub mod experiments;
pub mod hydraulics;
pub mod linalg;
pub mod plot;
pub mod scalar;
pub mod scenario;
pub mod stats;
pub mod topology;

pub use error::{Error, Result};
pub use estimation::{build_system, estimate, identifiability, regressor_row, DEFAULT_RANK_TOL};
pub use experiments::{
    monte_carlo, noisy_conditions, reference_scenario, run_trial, ExperimentConfig, ExperimentSummary, TrialSettings,
};
pub use hydraulics::{
    f_eval, min_required_dp, nodal_pressures, pipe_resistance_from_physical, required_valve_positions,
    simulate, solve_supply_flows, valve_resistance_from_k,
};
pub use scalar::Real;
pub use scenario::{apply_noise, generate_load_conditions, NoiseModel, ScenarioConfig};
pub use topology::{
    boundary_path, incidence_matrix, mirror_return, validate_topology, Edge, NetworkTopology, NodeId,
    ValidationReport,
};

pub type FlowVector = hydraulics::FlowVector<f64>;
pub type ControlVector = hydraulics::ControlVector<f64>;
pub type ResistanceVector = hydraulics::ResistanceVector<f64>;
pub type PressureState = hydraulics::PressureState<f64>;
pub type NetworkModel = hydraulics::NetworkModel<f64>;
pub type LoadCondition = scenario::LoadCondition<f64>;
pub type RegressionSystem = estimation::RegressionSystem<f64>;
pub type EstimationResult = estimation::EstimationResult<f64>;
pub type IdentifiabilityReport = estimation::IdentifiabilityReport<f64>;
pub type ReferenceScenario = experiments::ReferenceScenario<f64>;

pub type FlowVector32 = hydraulics::FlowVector<f32>;
pub type ResistanceVector32 = hydraulics::ResistanceVector<f32>;
pub type LoadCondition32 = scenario::LoadCondition<f32>;
pub type RegressionSystem32 = estimation::RegressionSystem<f32>;
pub type EstimationResult32 = estimation::EstimationResult<f32>;
