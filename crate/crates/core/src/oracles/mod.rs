//! Generalized min-max oracles: exhaustive grid search for finite or
//! discretized action sets, and nested projected gradient descent-ascent
//! for the Fisher market stage problem.

pub mod gda;
pub mod grid;
pub mod projection;

pub use gda::{nested_gda_fisher, GdaConfig, StagePoint};
pub use grid::{grid_minmax, minmax_table, GridOracle, GridOracleConfig};
pub use projection::{project_budget_set, project_halfspace_orthant};
