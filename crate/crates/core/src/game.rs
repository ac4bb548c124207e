//! Zero-sum stochastic Stackelberg games over a finite state set.
//!
//! The outer player (leader) minimizes the reward `r(s, x, y)`, the inner
//! player (follower) maximizes it, and the outer action restricts the inner
//! player to `{y : g(s, x, y) >= 0}`. The per-state Bellman backup
//!
//! ```text
//! (T v)(s) = min_x max_{y : g(s,x,y) >= 0} r(s,x,y) + γ Σ_{s'} P(s'|s,x,y) v(s')
//! ```
//!
//! is delegated to a [`MinMaxOracle`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for `g >= 0`.
pub const DEFAULT_FEAS_TOL: f64 = 1e-8;

/// Tolerance on `Σ P(s'|s,x,y) = 1`.
pub const TRANSITION_SUM_TOL: f64 = 1e-9;

pub type RewardFn = dyn Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync;
pub type ConstraintFn = dyn Fn(usize, &[f64], &[f64]) -> Vec<f64> + Send + Sync;
pub type TransitionFn = dyn Fn(usize, &[f64], &[f64]) -> Vec<f64> + Send + Sync;
/// Stage constraints `g(x, y)` at a fixed state; feasible when all `>= 0`.
pub type StageConstraints<'a> = dyn Fn(&[f64], &[f64]) -> Vec<f64> + 'a;

/// Action set of one player: a box or an explicit finite set of vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionSpace {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Grid { points: Vec<Vec<f64>> },
}

impl ActionSpace {
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidGame(format!(
                "box bounds must be nonempty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidGame(format!(
                "box coordinate {i}: lower {} > upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(ActionSpace::Box { lower, upper })
    }

    /// Unit box `[0, 1]^dim`.
    pub fn unit_box(dim: usize) -> Self {
        ActionSpace::Box {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn grid(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidGame("action grid is empty".into()));
        };
        let dim = first.len();
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidGame(
                "action grid has mixed dimensions".into(),
            ));
        }
        for (i, p) in points.iter().enumerate() {
            if points[..i].contains(p) {
                return Err(Error::InvalidGame(format!("duplicate grid point {p:?}")));
            }
        }
        Ok(ActionSpace::Grid { points })
    }

    pub fn dim(&self) -> usize {
        match self {
            ActionSpace::Box { lower, .. } => lower.len(),
            ActionSpace::Grid { points } => points[0].len(),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            ActionSpace::Box { lower, upper } => {
                x.len() == lower.len()
                    && x.iter()
                        .zip(lower.iter().zip(upper))
                        .all(|(v, (lo, hi))| lo <= v && v <= hi)
            }
            ActionSpace::Grid { points } => points.iter().any(|p| p.as_slice() == x),
        }
    }

    /// Finite point set in lexicographic order. Boxes are discretized with
    /// `resolution` evenly spaced points per coordinate (endpoints included);
    /// grids are returned as given.
    pub fn discretize(&self, resolution: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            ActionSpace::Grid { points } => Ok(points.clone()),
            ActionSpace::Box { lower, upper } => {
                if resolution < 2 {
                    return Err(Error::domain("resolution", "must be at least 2"));
                }
                let axes: Vec<Vec<f64>> = lower
                    .iter()
                    .zip(upper)
                    .map(|(&lo, &hi)| {
                        (0..resolution)
                            .map(|k| lo + (hi - lo) * k as f64 / (resolution - 1) as f64)
                            .collect()
                    })
                    .collect();
                let mut out: Vec<Vec<f64>> = vec![Vec::new()];
                for axis in &axes {
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            axis.iter().map(move |&v| {
                                let mut p = prefix.clone();
                                p.push(v);
                                p
                            })
                        })
                        .collect();
                }
                Ok(out)
            }
        }
    }
}

/// A zero-sum stochastic Stackelberg game `(S, X, Y, r, g, P, γ)`.
pub struct StochasticGame {
    n_states: usize,
    discount: f64,
    reward_bound: f64,
    outer_space: ActionSpace,
    inner_space: ActionSpace,
    reward: Box<RewardFn>,
    constraints: Box<ConstraintFn>,
    transition: Box<TransitionFn>,
    budgets: Option<Vec<Vec<f64>>>,
}

impl std::fmt::Debug for StochasticGame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StochasticGame")
            .field("n_states", &self.n_states)
            .field("discount", &self.discount)
            .field("reward_bound", &self.reward_bound)
            .field("outer_space", &self.outer_space)
            .field("inner_space", &self.inner_space)
            .finish_non_exhaustive()
    }
}

impl StochasticGame {
    pub fn builder(n_states: usize) -> GameBuilder {
        GameBuilder {
            n_states,
            discount: None,
            reward_bound: None,
            outer_space: None,
            inner_space: None,
            reward: None,
            constraints: None,
            transition: None,
            budgets: None,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    pub fn outer_space(&self) -> &ActionSpace {
        &self.outer_space
    }

    pub fn inner_space(&self) -> &ActionSpace {
        &self.inner_space
    }

    pub fn reward(&self, state: usize, x: &[f64], y: &[f64]) -> f64 {
        (self.reward)(state, x, y)
    }

    pub fn constraints(&self, state: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
        (self.constraints)(state, x, y)
    }

    pub fn transition(&self, state: usize, x: &[f64], y: &[f64]) -> Vec<f64> {
        (self.transition)(state, x, y)
    }

    /// Budget coordinates of a state, when the game carries them.
    pub fn budget_coords(&self, state: usize) -> Option<&[f64]> {
        self.budgets.as_ref().map(|b| b[state].as_slice())
    }

    pub fn is_feasible(&self, state: usize, x: &[f64], y: &[f64], feas_tol: f64) -> bool {
        self.constraints(state, x, y)
            .iter()
            .all(|&g| g >= -feas_tol)
    }

    /// Half-width `r̄/(1-γ)` of the value-function box.
    pub fn value_bound(&self) -> f64 {
        self.reward_bound / (1.0 - self.discount)
    }

    /// Checks the runtime invariants on discretized action sets: transitions
    /// are distributions, rewards respect the bound, and every outer action
    /// leaves a feasible inner action.
    pub fn validate_on(&self, outer: &[Vec<f64>], inner: &[Vec<f64>], feas_tol: f64) -> Result<()> {
        for s in 0..self.n_states {
            for x in outer {
                let mut any_feasible = false;
                for y in inner {
                    let r = self.reward(s, x, y);
                    if !(r.abs() <= self.reward_bound) {
                        return Err(Error::InvalidGame(format!(
                            "|r({s}, {x:?}, {y:?})| = {} exceeds reward bound {}",
                            r.abs(),
                            self.reward_bound
                        )));
                    }
                    check_distribution(&self.transition(s, x, y), self.n_states)
                        .map_err(|e| Error::InvalidGame(format!("P(.|{s}, {x:?}, {y:?}): {e}")))?;
                    any_feasible |= self.is_feasible(s, x, y, feas_tol);
                }
                if !any_feasible {
                    return Err(Error::InvalidGame(format!(
                        "state {s}, outer action {x:?}: no feasible inner action"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_distribution(p: &[f64], n: usize) -> std::result::Result<(), String> {
    if p.len() != n {
        return Err(format!("length {} != {n}", p.len()));
    }
    if p.iter().any(|&v| !(v >= 0.0)) {
        return Err("negative or NaN entry".into());
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > TRANSITION_SUM_TOL {
        return Err(format!("sums to {total}"));
    }
    Ok(())
}

pub struct GameBuilder {
    n_states: usize,
    discount: Option<f64>,
    reward_bound: Option<f64>,
    outer_space: Option<ActionSpace>,
    inner_space: Option<ActionSpace>,
    reward: Option<Box<RewardFn>>,
    constraints: Option<Box<ConstraintFn>>,
    transition: Option<Box<TransitionFn>>,
    budgets: Option<Vec<Vec<f64>>>,
}

impl GameBuilder {
    pub fn discount(mut self, gamma: f64) -> Self {
        self.discount = Some(gamma);
        self
    }

    pub fn reward_bound(mut self, bound: f64) -> Self {
        self.reward_bound = Some(bound);
        self
    }

    pub fn outer_space(mut self, space: ActionSpace) -> Self {
        self.outer_space = Some(space);
        self
    }

    pub fn inner_space(mut self, space: ActionSpace) -> Self {
        self.inner_space = Some(space);
        self
    }

    pub fn reward(
        mut self,
        f: impl Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.reward = Some(Box::new(f));
        self
    }

    pub fn constraints(
        mut self,
        g: impl Fn(usize, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.constraints = Some(Box::new(g));
        self
    }

    pub fn transition(
        mut self,
        p: impl Fn(usize, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.transition = Some(Box::new(p));
        self
    }

    /// Attaches budget coordinates to each state so that
    /// [`StateValueFunction::LinearInBudget`] can be evaluated on the game.
    pub fn budgets(mut self, budgets: Vec<Vec<f64>>) -> Self {
        self.budgets = Some(budgets);
        self
    }

    pub fn build(self) -> Result<StochasticGame> {
        let n_states = self.n_states;
        if n_states == 0 {
            return Err(Error::InvalidGame("state set is empty".into()));
        }
        let discount = self
            .discount
            .ok_or_else(|| Error::InvalidGame("discount not set".into()))?;
        // γ = 0 is admitted: it reduces the game to its one-shot stage game.
        if !(0.0..1.0).contains(&discount) {
            return Err(Error::InvalidGame(format!(
                "discount {discount} not in [0, 1)"
            )));
        }
        let reward_bound = self
            .reward_bound
            .ok_or_else(|| Error::InvalidGame("reward bound not set".into()))?;
        if !(reward_bound >= 0.0 && reward_bound.is_finite()) {
            return Err(Error::InvalidGame(format!(
                "reward bound {reward_bound} invalid"
            )));
        }
        if let Some(b) = &self.budgets {
            if b.len() != n_states {
                return Err(Error::InvalidGame(
                    "one budget vector per state required".into(),
                ));
            }
        }
        let missing = |what: &str| Error::InvalidGame(format!("{what} not set"));
        Ok(StochasticGame {
            n_states,
            discount,
            reward_bound,
            outer_space: self.outer_space.ok_or_else(|| missing("outer space"))?,
            inner_space: self.inner_space.ok_or_else(|| missing("inner space"))?,
            reward: self.reward.ok_or_else(|| missing("reward"))?,
            constraints: self
                .constraints
                .unwrap_or_else(|| Box::new(|_, _, _| Vec::new())),
            transition: self.transition.ok_or_else(|| missing("transition"))?,
            budgets: self.budgets,
        })
    }
}

/// State-value function: a table over finite states, or `a·b + c` over the
/// budget coordinates `b` of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateValueFunction {
    Tabular(Vec<f64>),
    LinearInBudget { a: Vec<f64>, c: f64 },
}

impl StateValueFunction {
    pub fn zeros(n_states: usize) -> Self {
        StateValueFunction::Tabular(vec![0.0; n_states])
    }

    pub fn linear_zero(n_buyers: usize) -> Self {
        StateValueFunction::LinearInBudget {
            a: vec![0.0; n_buyers],
            c: 0.0,
        }
    }

    pub fn as_table(&self) -> Option<&[f64]> {
        match self {
            StateValueFunction::Tabular(v) => Some(v),
            StateValueFunction::LinearInBudget { .. } => None,
        }
    }

    /// Value at budget vector `b`; only defined for the linear form.
    pub fn at_budget(&self, b: &[f64]) -> Result<f64> {
        match self {
            StateValueFunction::LinearInBudget { a, c } => {
                if a.len() != b.len() {
                    return Err(Error::UnsupportedValueFunction(format!(
                        "linear value has {} coefficients, budget has {} coordinates",
                        a.len(),
                        b.len()
                    )));
                }
                Ok(a.iter().zip(b).map(|(ai, bi)| ai * bi).sum::<f64>() + c)
            }
            StateValueFunction::Tabular(_) => Err(Error::UnsupportedValueFunction(
                "tabular values cannot be evaluated at a continuous budget".into(),
            )),
        }
    }

    /// Value of finite state `state` of `game`.
    pub fn at_state(&self, game: &StochasticGame, state: usize) -> Result<f64> {
        match self {
            StateValueFunction::Tabular(v) => v.get(state).copied().ok_or_else(|| {
                Error::UnsupportedValueFunction(format!(
                    "table has {} entries, state {state} requested",
                    v.len()
                ))
            }),
            StateValueFunction::LinearInBudget { .. } => {
                let b = game.budget_coords(state).ok_or_else(|| {
                    Error::UnsupportedValueFunction(
                        "game states carry no budget coordinates".into(),
                    )
                })?;
                self.at_budget(b)
            }
        }
    }

    /// Sup-norm distance between two tables.
    pub fn sup_distance(&self, other: &Self) -> Option<f64> {
        let (a, b) = (self.as_table()?, other.as_table()?);
        (a.len() == b.len()).then(|| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
    }
}

/// Stationary deterministic policy pair, one action per state.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyProfile {
    pub outer: Vec<Vec<f64>>,
    pub inner: Vec<Vec<f64>>,
}

/// Value and action pair returned by a generalized min-max oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxPoint {
    pub value: f64,
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
}

/// Solver for `min_{x ∈ X} max_{y ∈ Y : g(x,y) >= 0} f(x, y)`.
///
/// Implementations must be free of shared mutable state: the Bellman
/// operator calls one oracle from several threads at once.
pub trait MinMaxOracle: Sync {
    fn minmax(
        &self,
        outer: &ActionSpace,
        inner: &ActionSpace,
        objective: &dyn Fn(&[f64], &[f64]) -> f64,
        constraints: &StageConstraints,
    ) -> Result<MinMaxPoint>;

    /// Tolerance under which the oracle treats `g >= 0` as satisfied.
    fn feas_tol(&self) -> f64;
}

/// `Q(s, x, y) = r(s, x, y) + γ Σ_{s'} P(s'|s, x, y) v(s')`.
pub fn q_from_v(
    game: &StochasticGame,
    v: &StateValueFunction,
    state: usize,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let r = game.reward(state, x, y);
    let gamma = game.discount();
    let q = if gamma == 0.0 {
        r
    } else {
        let p = game.transition(state, x, y);
        let mut expected = 0.0;
        for (next, &prob) in p.iter().enumerate() {
            if prob != 0.0 {
                expected += prob * v.at_state(game, next)?;
            }
        }
        r + gamma * expected
    };
    if !q.is_finite() {
        return Err(Error::NonFinite(format!("Q({state}, {x:?}, {y:?})")));
    }
    Ok(q)
}

/// Result of one per-state Bellman backup.
#[derive(Debug, Clone, PartialEq)]
pub struct Backup {
    pub value: f64,
    pub outer: Vec<f64>,
    pub inner: Vec<f64>,
}

/// `(T v)(s)` together with the oracle's Stackelberg action pair.
pub fn bellman_backup(
    game: &StochasticGame,
    v: &StateValueFunction,
    state: usize,
    oracle: &dyn MinMaxOracle,
) -> Result<Backup> {
    // The oracle interface is infallible per evaluation; the first error is
    // stashed and reported after the solve.
    let failure = std::sync::Mutex::new(None);
    let objective = |x: &[f64], y: &[f64]| match q_from_v(game, v, state, x, y) {
        Ok(q) => q,
        Err(e) => {
            failure.lock().unwrap().get_or_insert(e);
            f64::NAN
        }
    };
    let constraints = |x: &[f64], y: &[f64]| game.constraints(state, x, y);
    let point = oracle
        .minmax(
            game.outer_space(),
            game.inner_space(),
            &objective,
            &constraints,
        )
        .map_err(|e| match e {
            Error::Infeasible => Error::InfeasibleState { state },
            other => other,
        });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    let point = point?;
    if !game.is_feasible(state, &point.outer, &point.inner, oracle.feas_tol()) {
        return Err(Error::InfeasibleState { state });
    }
    Ok(Backup {
        value: point.value,
        outer: point.outer,
        inner: point.inner,
    })
}

fn backups(
    game: &StochasticGame,
    v: &StateValueFunction,
    oracle: &dyn MinMaxOracle,
) -> Result<Vec<Backup>> {
    // par_iter + collect keeps state order, so the result does not depend on
    // scheduling.
    (0..game.n_states())
        .into_par_iter()
        .map(|s| bellman_backup(game, v, s, oracle))
        .collect()
}

/// One application of the Bellman operator; returns a fresh table.
pub fn apply_operator(
    game: &StochasticGame,
    v: &StateValueFunction,
    oracle: &dyn MinMaxOracle,
) -> Result<StateValueFunction> {
    Ok(StateValueFunction::Tabular(
        backups(game, v, oracle)?
            .into_iter()
            .map(|b| b.value)
            .collect(),
    ))
}

/// Greedy policy profile with respect to `v`: at each state the oracle's
/// Stackelberg pair of the backed-up Q game.
pub fn greedy_policy(
    game: &StochasticGame,
    v: &StateValueFunction,
    oracle: &dyn MinMaxOracle,
) -> Result<PolicyProfile> {
    let (outer, inner) = backups(game, v, oracle)?
        .into_iter()
        .map(|b| (b.outer, b.inner))
        .unzip();
    Ok(PolicyProfile { outer, inner })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::grid::GridOracle;

    fn one_state(reward: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> StochasticGame {
        StochasticGame::builder(1)
            .discount(0.5)
            .reward_bound(1.0)
            .outer_space(ActionSpace::grid(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap())
            .inner_space(ActionSpace::grid(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap())
            .reward(move |_, x, y| reward(x, y))
            .transition(|_, _, _| vec![1.0])
            .build()
            .unwrap()
    }

    fn two_state_const_reward() -> StochasticGame {
        StochasticGame::builder(2)
            .discount(0.9)
            .reward_bound(1.0)
            .outer_space(ActionSpace::unit_box(1))
            .inner_space(ActionSpace::unit_box(1))
            .reward(|_, _, _| 1.0)
            .transition(|_, _, _| vec![0.5, 0.5])
            .build()
            .unwrap()
    }

    #[test]
    fn q_hand_arithmetic() {
        let g = two_state_const_reward();
        let v = StateValueFunction::Tabular(vec![0.0, 10.0]);
        let q = q_from_v(&g, &v, 0, &[0.3], &[0.7]).unwrap();
        assert!((q - 5.5).abs() < 1e-12);
    }

    #[test]
    fn q_with_zero_values_is_reward() {
        let g = two_state_const_reward();
        assert_eq!(
            q_from_v(&g, &StateValueFunction::zeros(2), 1, &[0.0], &[1.0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn q_reports_non_finite() {
        let g = two_state_const_reward();
        let v = StateValueFunction::Tabular(vec![f64::INFINITY, 0.0]);
        assert!(matches!(
            q_from_v(&g, &v, 0, &[0.0], &[0.0]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn linear_value_on_game_with_budgets() {
        let g = StochasticGame::builder(2)
            .discount(0.5)
            .reward_bound(0.0)
            .outer_space(ActionSpace::unit_box(1))
            .inner_space(ActionSpace::unit_box(1))
            .reward(|_, _, _| 0.0)
            .transition(|_, _, _| vec![0.0, 1.0])
            .budgets(vec![vec![1.0, 2.0], vec![3.0, 4.0]])
            .build()
            .unwrap();
        let v = StateValueFunction::LinearInBudget {
            a: vec![1.0, -1.0],
            c: 0.5,
        };
        assert_eq!(v.at_state(&g, 1).unwrap(), -0.5);
        assert_eq!(q_from_v(&g, &v, 0, &[0.0], &[0.0]).unwrap(), -0.25);
    }

    #[test]
    fn backup_squared_distance() {
        let g = one_state(|x, y| (x[0] - y[0]).powi(2));
        let oracle = GridOracle::default();
        let b = bellman_backup(&g, &StateValueFunction::Tabular(vec![0.0]), 0, &oracle).unwrap();
        assert_eq!(b.value, 0.25);
        assert_eq!(b.outer, vec![0.5]);
        assert_eq!(b.inner, vec![0.0]);
    }

    #[test]
    fn backup_coupled_constraint() {
        let g = StochasticGame::builder(1)
            .discount(0.5)
            .reward_bound(1.0)
            .outer_space(ActionSpace::grid(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap())
            .inner_space(ActionSpace::grid(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap())
            .reward(|_, _, y| y[0])
            .constraints(|_, x, y| vec![x[0] - y[0]])
            .transition(|_, _, _| vec![1.0])
            .build()
            .unwrap();
        let b = bellman_backup(
            &g,
            &StateValueFunction::Tabular(vec![0.0]),
            0,
            &GridOracle::default(),
        )
        .unwrap();
        assert_eq!((b.value, b.outer[0], b.inner[0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn backup_infeasible_state_is_tagged() {
        let g = StochasticGame::builder(2)
            .discount(0.5)
            .reward_bound(1.0)
            .outer_space(ActionSpace::unit_box(1))
            .inner_space(ActionSpace::unit_box(1))
            .reward(|_, _, _| 0.0)
            .constraints(|s, _, _| vec![if s == 1 { -1.0 } else { 0.0 }])
            .transition(|_, _, _| vec![0.5, 0.5])
            .build()
            .unwrap();
        let err =
            apply_operator(&g, &StateValueFunction::zeros(2), &GridOracle::default()).unwrap_err();
        assert_eq!(err, Error::InfeasibleState { state: 1 });
    }

    #[test]
    fn operator_single_state_closed_form() {
        // Stage min-max of (x-y)^2 is 0.25; with a constant input v0 the
        // output is 0.25 + γ v0.
        let g = one_state(|x, y| (x[0] - y[0]).powi(2));
        let out = apply_operator(
            &g,
            &StateValueFunction::Tabular(vec![3.0]),
            &GridOracle::default(),
        )
        .unwrap();
        assert_eq!(out, StateValueFunction::Tabular(vec![0.25 + 0.5 * 3.0]));
    }

    #[test]
    fn zero_reward_is_fixed_point() {
        let g = StochasticGame::builder(3)
            .discount(0.7)
            .reward_bound(0.0)
            .outer_space(ActionSpace::unit_box(1))
            .inner_space(ActionSpace::unit_box(1))
            .reward(|_, _, _| 0.0)
            .transition(|s, _, _| {
                let mut p = vec![0.0; 3];
                p[(s + 1) % 3] = 1.0;
                p
            })
            .build()
            .unwrap();
        let out =
            apply_operator(&g, &StateValueFunction::zeros(3), &GridOracle::default()).unwrap();
        assert_eq!(out, StateValueFunction::zeros(3));
    }

    #[test]
    fn greedy_picks_dominant_outer_action() {
        // x = 1 lowers the reward for every y.
        let g = one_state(|x, y| y[0] - x[0]);
        let pol = greedy_policy(
            &g,
            &StateValueFunction::Tabular(vec![0.0]),
            &GridOracle::default(),
        )
        .unwrap();
        assert_eq!(pol.outer, vec![vec![1.0]]);
        assert_eq!(pol.inner, vec![vec![1.0]]);
    }

    #[test]
    fn greedy_tie_break_lowest_index() {
        let g = one_state(|_, _| 0.3);
        let pol = greedy_policy(
            &g,
            &StateValueFunction::Tabular(vec![0.0]),
            &GridOracle::default(),
        )
        .unwrap();
        assert_eq!(pol.outer, vec![vec![0.0]]);
        assert_eq!(pol.inner, vec![vec![0.0]]);
    }

    #[test]
    fn action_space_validation() {
        assert!(ActionSpace::new_box(vec![1.0], vec![0.0]).is_err());
        assert!(ActionSpace::grid(vec![]).is_err());
        assert!(ActionSpace::grid(vec![vec![0.0], vec![0.0]]).is_err());
        let b = ActionSpace::new_box(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let pts = b.discretize(3).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![0.0, -1.0]);
        assert_eq!(pts[1], vec![0.0, 0.0]);
        assert_eq!(pts[8], vec![1.0, 1.0]);
        assert!(b.discretize(1).is_err());
        assert!(b.contains(&[0.5, 0.0]));
        assert!(!b.contains(&[1.5, 0.0]));
    }

    #[test]
    fn builder_rejects_bad_discount() {
        let r = StochasticGame::builder(1)
            .discount(1.0)
            .reward_bound(1.0)
            .outer_space(ActionSpace::unit_box(1))
            .inner_space(ActionSpace::unit_box(1))
            .reward(|_, _, _| 0.0)
            .transition(|_, _, _| vec![1.0])
            .build();
        assert!(matches!(r, Err(Error::InvalidGame(_))));
    }

    #[test]
    fn validate_catches_bad_transition() {
        let g = StochasticGame::builder(2)
            .discount(0.5)
            .reward_bound(1.0)
            .outer_space(ActionSpace::unit_box(1))
            .inner_space(ActionSpace::unit_box(1))
            .reward(|_, _, _| 0.0)
            .transition(|_, _, _| vec![0.5, 0.6])
            .build()
            .unwrap();
        let grid = ActionSpace::unit_box(1).discretize(2).unwrap();
        assert!(g.validate_on(&grid, &grid, DEFAULT_FEAS_TOL).is_err());
    }
}
