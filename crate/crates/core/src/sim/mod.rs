//! Simulation harness: the data-generating mechanism, its exact oracle,
//! replicated scenarios and their performance metrics.

pub mod dgm;
pub mod metrics;
pub mod oracle;
pub mod scenario;

pub use dgm::{generate, generate_stream, DgmParams};
pub use metrics::{compute_metrics, Metrics, RepEstimate};
pub use oracle::{
    cells, correct_designs, oracle, oracle_for, pseudo_data, Cell, OracleNuisance, OracleTruths,
    Population,
};
pub use scenario::{
    misspecification_grid, parse_grid, run_grid, run_scenario, EffectKind, MetricsRow, ScenarioSpec,
};
