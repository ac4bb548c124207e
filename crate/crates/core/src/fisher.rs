//! Stochastic Fisher markets with savings.
//!
//! Each state is a one-shot Fisher market with budgets `b`, supply `q` and
//! fixed buyer types. The market sets prices `p`; buyers pick allocations
//! `X` and savings `s` subject to `X_i·p + s_i <= b_i`; next-period budgets
//! are `b' = replenish + ρ s` with the interest rate `ρ` drawn from a finite
//! distribution. The Stackelberg stage payoff is
//!
//! ```text
//! Σ_j q_j p_j + Σ_i (b_i - s_i) log u_i(X_i)
//! ```
//!
//! plus `γ E[V(b')]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::StateValueFunction;

/// Lower clamp on utilities inside `log` and in divisions.
pub const DEFAULT_UTILITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityClass {
    Linear,
    CobbDouglas,
    Leontief,
}

impl UtilityClass {
    pub fn name(self) -> &'static str {
        match self {
            UtilityClass::Linear => "linear",
            UtilityClass::CobbDouglas => "cobb-douglas",
            UtilityClass::Leontief => "leontief",
        }
    }
}

impl std::str::FromStr for UtilityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(UtilityClass::Linear),
            "cobb-douglas" => Ok(UtilityClass::CobbDouglas),
            "leontief" => Ok(UtilityClass::Leontief),
            other => Err(Error::InvalidMarket(format!(
                "unknown utility class `{other}`"
            ))),
        }
    }
}

fn one() -> f64 {
    1.0
}

/// A buyer's utility function, degree-1 homogeneous in every class:
///
/// * linear: `scale · Σ_j θ_j x_j`
/// * Cobb-Douglas: `scale · Π_j x_j^θ_j` with `Σ θ_j = 1`
/// * Leontief: `scale · min_j x_j / θ_j`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySpec {
    pub class: UtilityClass,
    pub theta: Vec<f64>,
    #[serde(default = "one")]
    pub scale: f64,
}

impl UtilitySpec {
    /// Validates `θ > 0` and normalizes Cobb-Douglas exponents to sum to one.
    pub fn new(class: UtilityClass, theta: Vec<f64>) -> Result<Self> {
        Self::scaled(class, theta, 1.0)
    }

    pub fn scaled(class: UtilityClass, theta: Vec<f64>, scale: f64) -> Result<Self> {
        let mut spec = UtilitySpec {
            class,
            theta,
            scale,
        };
        spec.normalize()?;
        Ok(spec)
    }

    pub fn linear(theta: Vec<f64>) -> Result<Self> {
        Self::new(UtilityClass::Linear, theta)
    }

    pub fn cobb_douglas(theta: Vec<f64>) -> Result<Self> {
        Self::new(UtilityClass::CobbDouglas, theta)
    }

    pub fn leontief(theta: Vec<f64>) -> Result<Self> {
        Self::new(UtilityClass::Leontief, theta)
    }

    fn normalize(&mut self) -> Result<()> {
        if self.theta.is_empty() {
            return Err(Error::InvalidMarket("utility has no goods".into()));
        }
        if self.theta.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidMarket(format!(
                "valuations must be positive, got {:?}",
                self.theta
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidMarket(format!(
                "utility scale {} must be positive",
                self.scale
            )));
        }
        if self.class == UtilityClass::CobbDouglas {
            let total: f64 = self.theta.iter().sum();
            self.theta.iter_mut().for_each(|t| *t /= total);
        }
        Ok(())
    }

    pub fn n_goods(&self) -> usize {
        self.theta.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let raw = match self.class {
            UtilityClass::Linear => self.theta.iter().zip(x).map(|(t, v)| t * v).sum(),
            UtilityClass::CobbDouglas => {
                if x.iter().any(|&v| v <= 0.0) {
                    0.0
                } else {
                    self.theta
                        .iter()
                        .zip(x)
                        .map(|(t, v)| t * v.ln())
                        .sum::<f64>()
                        .exp()
                }
            }
            UtilityClass::Leontief => x
                .iter()
                .zip(&self.theta)
                .map(|(v, t)| v / t)
                .fold(f64::INFINITY, f64::min),
        };
        self.scale * raw
    }

    /// Gradient, or a subgradient where the utility is not differentiable.
    ///
    /// Leontief uses `scale · e_j / θ_j` at the smallest index `j` attaining
    /// the minimum. Cobb-Douglas returns the zero vector when any coordinate
    /// is zero.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        match self.class {
            UtilityClass::Linear => self.theta.iter().map(|t| self.scale * t).collect(),
            UtilityClass::CobbDouglas => {
                if x.iter().any(|&v| v <= 0.0) {
                    return vec![0.0; x.len()];
                }
                let u = self.value(x);
                self.theta.iter().zip(x).map(|(t, v)| u * t / v).collect()
            }
            UtilityClass::Leontief => {
                let mut arg = 0;
                for j in 1..x.len() {
                    if x[j] / self.theta[j] < x[arg] / self.theta[arg] {
                        arg = j;
                    }
                }
                let mut g = vec![0.0; x.len()];
                g[arg] = self.scale / self.theta[arg];
                g
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterestRate {
    pub rate: f64,
    pub prob: f64,
}

/// Budget transition `b' = replenish + ρ s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetDynamics {
    pub replenish: f64,
    pub interest_rates: Vec<InterestRate>,
}

impl Default for BudgetDynamics {
    fn default() -> Self {
        Self {
            replenish: 9.5,
            interest_rates: vec![InterestRate {
                rate: 1.0,
                prob: 1.0,
            }],
        }
    }
}

impl BudgetDynamics {
    /// Five equiprobable rates `{0.9, 1.0, 1.1, 1.2, 1.5}`.
    pub fn five_point_rates(replenish: f64) -> Self {
        Self {
            replenish,
            interest_rates: [0.9, 1.0, 1.1, 1.2, 1.5]
                .iter()
                .map(|&rate| InterestRate { rate, prob: 0.2 })
                .collect(),
        }
    }

    pub fn expected_rate(&self) -> f64 {
        self.interest_rates.iter().map(|r| r.rate * r.prob).sum()
    }

    pub fn is_deterministic(&self) -> bool {
        self.interest_rates.iter().filter(|r| r.prob > 0.0).count() <= 1
    }

    pub fn next_budgets(&self, savings: &[f64], rate: f64) -> Vec<f64> {
        savings.iter().map(|s| self.replenish + rate * s).collect()
    }

    /// Draws a rate by inverse CDF over the listed support.
    pub fn sample_rate<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for r in &self.interest_rates {
            acc += r.prob;
            if u < acc {
                return r.rate;
            }
        }
        // u landed in the rounding gap above the last cumulative sum.
        self.interest_rates
            .iter()
            .rev()
            .find(|r| r.prob > 0.0)
            .map_or(1.0, |r| r.rate)
    }

    fn validate(&self) -> Result<()> {
        if !(self.replenish >= 0.0 && self.replenish.is_finite()) {
            return Err(Error::InvalidMarket(format!(
                "replenish {} must be >= 0",
                self.replenish
            )));
        }
        if self.interest_rates.is_empty() {
            return Err(Error::InvalidMarket(
                "interest-rate distribution is empty".into(),
            ));
        }
        if self
            .interest_rates
            .iter()
            .any(|r| !(r.prob >= 0.0) || !(r.rate >= 0.0 && r.rate.is_finite()))
        {
            return Err(Error::InvalidMarket(
                "interest rates and probabilities must be >= 0".into(),
            ));
        }
        let total: f64 = self.interest_rates.iter().map(|r| r.prob).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMarket(format!(
                "interest probabilities sum to {total}"
            )));
        }
        Ok(())
    }
}

/// A stochastic Fisher market with savings. Types and supply are fixed
/// across states; budgets are the only state coordinate that moves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherMarket {
    pub utilities: Vec<UtilitySpec>,
    pub supply: Vec<f64>,
    pub discount: f64,
    pub dynamics: BudgetDynamics,
    pub initial_budgets: Vec<f64>,
}

impl FisherMarket {
    pub fn new(
        utilities: Vec<UtilitySpec>,
        supply: Vec<f64>,
        discount: f64,
        dynamics: BudgetDynamics,
        initial_budgets: Vec<f64>,
    ) -> Result<Self> {
        let market = FisherMarket {
            utilities,
            supply,
            discount,
            dynamics,
            initial_budgets,
        };
        market.validate()?;
        Ok(market)
    }

    /// Market with unit supply, 9.5 replenishment, no interest and initial
    /// budgets of 10.
    pub fn with_defaults(utilities: Vec<UtilitySpec>, discount: f64) -> Result<Self> {
        let n = utilities.len();
        let m = utilities.first().map_or(0, |u| u.n_goods());
        Self::new(
            utilities,
            vec![1.0; m],
            discount,
            BudgetDynamics::default(),
            vec![10.0; n],
        )
    }

    /// Checks all invariants and re-normalizes Cobb-Douglas exponents;
    /// call after deserializing.
    pub fn validate(&self) -> Result<()> {
        if self.utilities.is_empty() {
            return Err(Error::InvalidMarket("market has no buyers".into()));
        }
        let m = self.supply.len();
        if m == 0 {
            return Err(Error::InvalidMarket("market has no goods".into()));
        }
        for (i, u) in self.utilities.iter().enumerate() {
            if u.n_goods() != m {
                return Err(Error::InvalidMarket(format!(
                    "buyer {i} values {} goods, supply lists {m}",
                    u.n_goods()
                )));
            }
            let mut check = u.clone();
            check.normalize()?;
            if u.class == UtilityClass::CobbDouglas
                && check
                    .theta
                    .iter()
                    .zip(&u.theta)
                    .any(|(a, b)| (a - b).abs() > 1e-12)
            {
                return Err(Error::InvalidMarket(format!(
                    "buyer {i}: Cobb-Douglas exponents must sum to 1"
                )));
            }
        }
        if self.supply.iter().any(|&q| !(q > 0.0 && q.is_finite())) {
            return Err(Error::InvalidMarket("supply must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidMarket(format!(
                "discount {} not in [0, 1)",
                self.discount
            )));
        }
        if self.initial_budgets.len() != self.utilities.len()
            || self.initial_budgets.iter().any(|&b| !(b >= 0.0))
        {
            return Err(Error::InvalidMarket(
                "initial budgets must be nonnegative, one per buyer".into(),
            ));
        }
        self.dynamics.validate()
    }

    pub fn n_buyers(&self) -> usize {
        self.utilities.len()
    }

    pub fn n_goods(&self) -> usize {
        self.supply.len()
    }

    pub fn initial_state(&self) -> MarketState {
        MarketState {
            budgets: self.initial_budgets.clone(),
            supply: self.supply.clone(),
        }
    }

    pub fn state(&self, budgets: Vec<f64>) -> MarketState {
        MarketState {
            budgets,
            supply: self.supply.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub budgets: Vec<f64>,
    pub supply: Vec<f64>,
}

/// Prices (outer action) and allocations with savings (inner action).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageAction {
    pub prices: Vec<f64>,
    pub alloc: Vec<Vec<f64>>,
    pub savings: Vec<f64>,
}

impl StageAction {
    /// Largest budget overrun `max_i (X_i·p + s_i - b_i)`.
    pub fn budget_violation(&self, budgets: &[f64]) -> f64 {
        self.alloc
            .iter()
            .zip(&self.savings)
            .zip(budgets)
            .map(|((x, s), b)| dot(x, &self.prices) + s - b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `Σ_i X_i - q`.
    pub fn excess_demand(&self, supply: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = supply.iter().map(|q| -q).collect();
        for x in &self.alloc {
            for (zj, xj) in z.iter_mut().zip(x) {
                *zj += xj;
            }
        }
        z
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `Σ_j q_j p_j + Σ_i (b_i - s_i) log max(u_i(X_i), floor)`.
pub fn stage_payoff(
    market: &FisherMarket,
    state: &MarketState,
    action: &StageAction,
    floor: f64,
) -> f64 {
    let price_term = dot(&state.supply, &action.prices);
    let log_term: f64 = market
        .utilities
        .iter()
        .zip(&action.alloc)
        .zip(state.budgets.iter().zip(&action.savings))
        .map(|((u, x), (b, s))| (b - s) * u.value(x).max(floor).ln())
        .sum();
    price_term + log_term
}

/// `E_ρ[V(replenish + ρ s)]`.
pub fn expected_continuation(
    market: &FisherMarket,
    v: &StateValueFunction,
    savings: &[f64],
) -> Result<f64> {
    let mut total = 0.0;
    for r in &market.dynamics.interest_rates {
        if r.prob > 0.0 {
            total += r.prob * v.at_budget(&market.dynamics.next_budgets(savings, r.rate))?;
        }
    }
    Ok(total)
}

/// `∂/∂s_i γ E[V(replenish + ρ s)] = γ E[ρ] a_i` for the linear value form.
pub fn savings_marginal(market: &FisherMarket, v: &StateValueFunction) -> Result<Vec<f64>> {
    match v {
        StateValueFunction::LinearInBudget { a, .. } => {
            if a.len() != market.n_buyers() {
                return Err(Error::UnsupportedValueFunction(format!(
                    "linear value has {} coefficients for {} buyers",
                    a.len(),
                    market.n_buyers()
                )));
            }
            let k = market.discount * market.dynamics.expected_rate();
            Ok(a.iter().map(|ai| k * ai).collect())
        }
        StateValueFunction::Tabular(_) => Err(Error::UnsupportedValueFunction(
            "budget derivatives need the linear value form".into(),
        )),
    }
}

/// Stage payoff plus discounted expected continuation value.
pub fn stage_objective(
    market: &FisherMarket,
    state: &MarketState,
    action: &StageAction,
    v: &StateValueFunction,
    floor: f64,
) -> Result<f64> {
    let cont = if market.discount == 0.0 {
        0.0
    } else {
        market.discount * expected_continuation(market, v, &action.savings)?
    };
    Ok(stage_payoff(market, state, action, floor) + cont)
}

/// Draws the next state and returns it with the realized interest rate.
pub fn transition_sample<R: Rng + ?Sized>(
    market: &FisherMarket,
    state: &MarketState,
    savings: &[f64],
    rng: &mut R,
) -> (MarketState, f64) {
    let rate = market.dynamics.sample_rate(rng);
    let next = MarketState {
        budgets: market.dynamics.next_budgets(savings, rate),
        supply: state.supply.clone(),
    };
    (next, rate)
}

/// All successor states with their probabilities, one entry per listed rate.
pub fn transition_support(
    market: &FisherMarket,
    state: &MarketState,
    savings: &[f64],
) -> Vec<(MarketState, f64)> {
    market
        .dynamics
        .interest_rates
        .iter()
        .map(|r| {
            (
                MarketState {
                    budgets: market.dynamics.next_budgets(savings, r.rate),
                    supply: state.supply.clone(),
                },
                r.prob,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecceConfig {
    /// Goods with `x_ij` above this count as purchased in the bang-per-buck check.
    pub purchase_tol: f64,
    /// Savings above this count as positive in the saving check.
    pub saving_tol: f64,
    pub utility_floor: f64,
}

impl Default for RecceConfig {
    fn default() -> Self {
        Self {
            purchase_tol: 1e-4,
            saving_tol: 1e-6,
            utility_floor: DEFAULT_UTILITY_FLOOR,
        }
    }
}

/// Equilibrium-condition residuals at one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateResiduals {
    /// `max_j p_j (Σ_i x_ij - q_j)`.
    pub clearing_value: f64,
    /// `max_j (Σ_i x_ij - q_j)_+`.
    pub excess_demand: f64,
    /// Per buyer: `max_j |(∂u_i/∂x_ij)/p_j - u_i/(b_i - s_i)| / (u_i/(b_i - s_i))`
    /// over purchased goods; `None` for degenerate buyers.
    pub bpb_spread: Vec<Option<f64>>,
    /// `|Σ_i (b_i - s_i - X_i·p)|`.
    pub walras: f64,
    /// Per buyer gap in `a_i = γ E[ρ] a_i` when saving, or the positive part
    /// of `γ E[ρ] a_i - a_i` when not saving.
    pub saving: Vec<f64>,
    /// Buyers whose spend `b_i - s_i` is at or below the utility floor.
    pub degenerate_buyers: Vec<usize>,
}

impl StateResiduals {
    pub fn max_bpb_spread(&self) -> f64 {
        self.bpb_spread
            .iter()
            .flatten()
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn max_saving(&self) -> f64 {
        self.saving.iter().copied().fold(0.0, f64::max)
    }
}

/// Residual report over a set of evaluation states.
///
/// The saving residual uses the budget derivative of the solver's (social)
/// value function in place of each buyer's own budget value; the two are
/// linked through the unit multiplier on the budget constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecceReport {
    pub states: Vec<StateResiduals>,
}

impl RecceReport {
    fn max_of(&self, f: impl Fn(&StateResiduals) -> f64) -> f64 {
        self.states.iter().map(f).fold(0.0, f64::max)
    }

    pub fn max_excess_demand(&self) -> f64 {
        self.max_of(|r| r.excess_demand)
    }

    pub fn max_clearing_value(&self) -> f64 {
        self.max_of(|r| r.clearing_value)
    }

    pub fn max_walras(&self) -> f64 {
        self.max_of(|r| r.walras)
    }

    pub fn max_bpb_spread(&self) -> f64 {
        self.max_of(StateResiduals::max_bpb_spread)
    }

    pub fn max_saving(&self) -> f64 {
        self.max_of(StateResiduals::max_saving)
    }

    pub fn any_degenerate(&self) -> bool {
        self.states.iter().any(|r| !r.degenerate_buyers.is_empty())
    }
}

/// Residuals of one state's action against the recursive competitive
/// equilibrium conditions.
pub fn state_residuals(
    market: &FisherMarket,
    v: &StateValueFunction,
    state: &MarketState,
    action: &StageAction,
    cfg: &RecceConfig,
) -> Result<StateResiduals> {
    let excess = action.excess_demand(&state.supply);
    let clearing_value = excess
        .iter()
        .zip(&action.prices)
        .map(|(z, p)| p * z)
        .fold(f64::NEG_INFINITY, f64::max);
    let excess_demand = excess.iter().fold(0.0_f64, |m, &z| m.max(z));

    let mut bpb_spread = Vec::with_capacity(market.n_buyers());
    let mut degenerate_buyers = Vec::new();
    let mut unspent = 0.0;
    for (i, u) in market.utilities.iter().enumerate() {
        let x = &action.alloc[i];
        let spend = state.budgets[i] - action.savings[i];
        unspent += spend - dot(x, &action.prices);
        if spend <= cfg.utility_floor {
            degenerate_buyers.push(i);
            bpb_spread.push(None);
            continue;
        }
        let target = u.value(x).max(cfg.utility_floor) / spend;
        let grad = u.gradient(x);
        let spread = x
            .iter()
            .zip(&grad)
            .zip(&action.prices)
            .filter(|((&xj, _), _)| xj > cfg.purchase_tol)
            .map(|((_, &gj), &pj)| {
                if pj > 0.0 {
                    ((gj / pj - target) / target).abs()
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        bpb_spread.push(Some(spread));
    }

    let saving = match v {
        StateValueFunction::LinearInBudget { a, .. } => {
            let marginal = savings_marginal(market, v)?;
            a.iter()
                .zip(&marginal)
                .zip(&action.savings)
                .map(|((&ai, &mi), &si)| {
                    if si > cfg.saving_tol {
                        (ai - mi).abs()
                    } else {
                        (mi - ai).max(0.0)
                    }
                })
                .collect()
        }
        StateValueFunction::Tabular(_) => {
            return Err(Error::UnsupportedValueFunction(
                "saving residuals need the linear value form".into(),
            ))
        }
    };

    Ok(StateResiduals {
        clearing_value,
        excess_demand,
        bpb_spread,
        walras: unspent.abs(),
        saving,
        degenerate_buyers,
    })
}

/// Evaluates `policy` at every state in `eval_states` and collects the
/// residuals.
pub fn verify_recce(
    market: &FisherMarket,
    v: &StateValueFunction,
    policy: &dyn Fn(&MarketState) -> Result<StageAction>,
    eval_states: &[MarketState],
    cfg: &RecceConfig,
) -> Result<RecceReport> {
    let states = eval_states
        .iter()
        .map(|s| state_residuals(market, v, s, &policy(s)?, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecceReport { states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_by_one(b: f64) -> (FisherMarket, MarketState) {
        let m = FisherMarket::new(
            vec![UtilitySpec::linear(vec![1.0]).unwrap()],
            vec![1.0],
            0.9,
            BudgetDynamics::default(),
            vec![b],
        )
        .unwrap();
        let s = m.initial_state();
        (m, s)
    }

    #[test]
    fn utility_examples() {
        let lin = UtilitySpec::linear(vec![1.0, 2.0]).unwrap();
        assert_eq!(lin.value(&[1.0, 1.0]), 3.0);
        assert_eq!(lin.gradient(&[1.0, 1.0]), vec![1.0, 2.0]);

        let cd = UtilitySpec::cobb_douglas(vec![0.5, 0.5]).unwrap();
        assert!((cd.value(&[4.0, 1.0]) - 2.0).abs() < 1e-12);
        let g = cd.gradient(&[4.0, 1.0]);
        assert!((g[0] - 0.25).abs() < 1e-12 && (g[1] - 1.0).abs() < 1e-12);

        let leo = UtilitySpec::leontief(vec![1.0, 2.0]).unwrap();
        assert_eq!(leo.value(&[2.0, 2.0]), 1.0);
        assert_eq!(leo.gradient(&[2.0, 2.0]), vec![0.0, 0.5]);
    }

    #[test]
    fn cobb_douglas_normalizes_and_handles_zero() {
        let cd = UtilitySpec::cobb_douglas(vec![2.0, 6.0]).unwrap();
        assert_eq!(cd.theta, vec![0.25, 0.75]);
        assert_eq!(cd.value(&[0.0, 1.0]), 0.0);
        assert_eq!(cd.gradient(&[0.0, 1.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn leontief_tie_uses_lowest_index() {
        let leo = UtilitySpec::leontief(vec![1.0, 1.0]).unwrap();
        assert_eq!(leo.gradient(&[1.0, 1.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn rejects_nonpositive_valuations() {
        assert!(UtilitySpec::linear(vec![1.0, 0.0]).is_err());
        assert!(UtilitySpec::scaled(UtilityClass::Linear, vec![1.0], 0.0).is_err());
    }

    #[test]
    fn stage_payoff_examples() {
        let (m, s) = one_by_one(1.0);
        let act = StageAction {
            prices: vec![1.0],
            alloc: vec![vec![1.0]],
            savings: vec![0.0],
        };
        assert_eq!(stage_payoff(&m, &s, &act, DEFAULT_UTILITY_FLOOR), 1.0);

        let saved = StageAction {
            prices: vec![3.0],
            alloc: vec![vec![0.0]],
            savings: vec![1.0],
        };
        assert_eq!(stage_payoff(&m, &s, &saved, DEFAULT_UTILITY_FLOOR), 3.0);

        let two =
            FisherMarket::with_defaults(vec![UtilitySpec::linear(vec![1.0, 1.0]).unwrap(); 2], 0.9)
                .unwrap();
        let st = two.state(vec![1.0, 1.0]);
        let act = StageAction {
            prices: vec![1.0, 1.0],
            alloc: vec![vec![0.5, 0.5]; 2],
            savings: vec![0.0, 0.0],
        };
        assert!((stage_payoff(&two, &st, &act, DEFAULT_UTILITY_FLOOR) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn transition_examples() {
        let (m, s) = one_by_one(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (next, rate) = transition_sample(&m, &s, &[0.5], &mut rng);
        assert_eq!(next.budgets, vec![10.0]);
        assert_eq!(rate, 1.0);

        let mut m5 = m.clone();
        m5.dynamics = BudgetDynamics::five_point_rates(9.5);
        for (st, p) in transition_support(&m5, &s, &[0.0]) {
            assert_eq!(st.budgets, vec![9.5]);
            assert_eq!(p, 0.2);
        }
        let total: f64 = transition_support(&m5, &s, &[1.0])
            .iter()
            .map(|(_, p)| p)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((m5.dynamics.next_budgets(&[1.0], 1.2)[0] - 10.7).abs() < 1e-12);
    }

    #[test]
    fn linear_continuation_and_marginal() {
        let (mut m, _) = one_by_one(1.0);
        m.dynamics = BudgetDynamics::five_point_rates(9.5);
        let v = StateValueFunction::LinearInBudget {
            a: vec![2.0],
            c: 1.0,
        };
        // E[2 (9.5 + ρ) + 1] with E[ρ] = 1.14.
        let e = expected_continuation(&m, &v, &[1.0]).unwrap();
        assert!((e - (2.0 * (9.5 + 1.14) + 1.0)).abs() < 1e-12);
        let mg = savings_marginal(&m, &v).unwrap();
        assert!((mg[0] - 0.9 * 1.14 * 2.0).abs() < 1e-12);
        assert!(savings_marginal(&m, &StateValueFunction::Tabular(vec![0.0])).is_err());
    }

    #[test]
    fn residuals_at_closed_form_equilibrium() {
        let (m, s) = one_by_one(2.0);
        let act = StageAction {
            prices: vec![2.0],
            alloc: vec![vec![1.0]],
            savings: vec![0.0],
        };
        let v = StateValueFunction::linear_zero(1);
        let r = verify_recce(&m, &v, &|_| Ok(act.clone()), &[s], &RecceConfig::default()).unwrap();
        assert!(r.max_excess_demand() < 1e-6);
        assert!(r.max_clearing_value().abs() < 1e-6);
        assert!(r.max_bpb_spread() < 1e-6);
        assert!(r.max_walras() < 1e-6);
        assert!(r.max_saving() < 1e-6);
        assert!(!r.any_degenerate());
    }

    #[test]
    fn residuals_flag_overallocation_and_degeneracy() {
        let two =
            FisherMarket::with_defaults(vec![UtilitySpec::linear(vec![1.0, 1.0]).unwrap(); 2], 0.9)
                .unwrap();
        let st = two.state(vec![1.0, 1.0]);
        let act = StageAction {
            prices: vec![1.0, 1.0],
            alloc: vec![vec![1.0, 0.0], vec![1.0, 0.0]],
            savings: vec![0.0, 1.0],
        };
        let r = state_residuals(
            &two,
            &StateValueFunction::linear_zero(2),
            &st,
            &act,
            &RecceConfig::default(),
        )
        .unwrap();
        assert!((r.excess_demand - 1.0).abs() < 1e-12);
        assert_eq!(r.degenerate_buyers, vec![1]);
        assert_eq!(r.bpb_spread[1], None);
    }

    #[test]
    fn market_validation() {
        let u = vec![UtilitySpec::linear(vec![1.0]).unwrap()];
        assert!(FisherMarket::new(
            u.clone(),
            vec![0.0],
            0.9,
            BudgetDynamics::default(),
            vec![1.0]
        )
        .is_err());
        assert!(FisherMarket::new(
            u.clone(),
            vec![1.0],
            1.0,
            BudgetDynamics::default(),
            vec![1.0]
        )
        .is_err());
        let bad = BudgetDynamics {
            replenish: 1.0,
            interest_rates: vec![InterestRate {
                rate: 1.0,
                prob: 0.5,
            }],
        };
        assert!(FisherMarket::new(u, vec![1.0], 0.9, bad, vec![1.0]).is_err());
    }
}
