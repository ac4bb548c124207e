use thiserror::Error;

/// Errors raised by the game, oracle, solver and market routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Every outer action leaves the inner player without a feasible action.
    #[error("no outer action admits a feasible inner action")]
    Infeasible,

    #[error("state {state}: no outer action admits a feasible inner action")]
    InfeasibleState { state: usize },

    #[error("non-finite iterate in {context} at iteration {iteration}")]
    NonFiniteIterate { iteration: usize, context: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("regression design matrix is rank deficient (rank {rank} < {cols})")]
    RegressionSingular { rank: usize, cols: usize },

    #[error("`{name}` out of domain: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid market: {0}")]
    InvalidMarket(String),

    #[error("unsupported value function: {0}")]
    UnsupportedValueFunction(String),

    #[error("value iteration step {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("rollout step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    /// Short machine-readable tag for the outermost error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Infeasible | Error::InfeasibleState { .. } => "infeasible",
            Error::NonFiniteIterate { .. } | Error::NonFinite(_) => "non_finite",
            Error::RegressionSingular { .. } => "regression_singular",
            Error::Domain { .. } => "domain",
            Error::InvalidGame(_) => "invalid_game",
            Error::InvalidMarket(_) => "invalid_market",
            Error::UnsupportedValueFunction(_) => "unsupported_value_function",
            Error::AtIteration { source, .. } | Error::AtStep { source, .. } => source.kind(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
