//! Simulation study: structural data generation, model scenarios, Monte
//! Carlo truth, replicate grids and median-based metrics.

mod dgp;
mod metrics;
mod oracle;
mod replicates;
mod scenarios;

pub use dgp::{generate_dgp, misspecify_features, roles_for, structural, AllowableConvention, Unit};
pub use metrics::{compute_metrics, median, Metrics};
pub use oracle::{true_value_oracle, OracleCell, OracleResult, REFERENCE_DELTA};
pub use replicates::{
    estimation_config, replicate_seed, resolve_truth, run_replicates, run_simulation, MetricsRow, ReplicateMatrix,
    SimulationCell, SimulationConfig, SimulationOutput, TruthInfo,
};
pub use scenarios::{correct_components, scenario_specs, Method};
