//! Zero-sum stochastic Stackelberg games: Bellman operator, exact and
//! fitted value iteration, generalized min-max oracles, and the stochastic
//! Fisher market with savings.
//!
//! ```
//! use stackgame::{toy, value_iteration, GridOracle, StateValueFunction, ViConfig};
//!
//! let game = toy::two_state_game(0.9).unwrap();
//! let oracle = GridOracle::default();
//! let out = value_iteration(&game, &oracle, &StateValueFunction::zeros(2), &ViConfig::default()).unwrap();
//! assert!(out.converged);
//! ```

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod fisher;
pub mod game;
pub mod oracles;
pub mod presets;
pub mod seed;
pub mod solver;
pub mod toy;

pub use error::{Error, Result};
pub use eval::{
    best_response_grid_dp, best_response_value, cumulative_utility, distance_to_mc, distance_to_um,
    evaluate, rollout_greedy, BestResponseConfig, BuyerReport, EquilibriumReport, EvalConfig,
    RolloutStep, Trajectory,
};
pub use fisher::{
    stage_objective, stage_payoff, transition_sample, transition_support, verify_recce,
    BudgetDynamics, FisherMarket, InterestRate, MarketState, RecceConfig, RecceReport, StageAction,
    StateResiduals, UtilityClass, UtilitySpec, DEFAULT_UTILITY_FLOOR,
};
pub use game::{
    apply_operator, bellman_backup, greedy_policy, q_from_v, ActionSpace, Backup, MinMaxOracle,
    MinMaxPoint, PolicyProfile, StageConstraints, StateValueFunction, StochasticGame,
    DEFAULT_FEAS_TOL,
};
pub use oracles::{
    grid_minmax, minmax_table, nested_gda_fisher, project_budget_set, GdaConfig, GridOracle,
    GridOracleConfig, StagePoint,
};
pub use presets::{preset, preset_sized, Preset, PRESET_NAMES};
pub use solver::{
    fitted_value_iteration, fitted_value_iteration_with, iterations_needed, value_iteration,
    FitIteration, FittedViConfig, FittedViResult, GdaStageSolver, StageSolver, ViConfig, ViResult,
    WarmEntry,
};
