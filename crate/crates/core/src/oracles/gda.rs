//! Nested projected gradient descent-ascent for the Fisher stage problem
//!
//! ```text
//! min_{p >= 0} max_{(X, s) : X_i·p + s_i <= b_i}
//!     Σ_j q_j p_j + Σ_i (b_i - s_i) log u_i(X_i) + γ E[V(replenish + ρ s)]
//! ```
//!
//! The inner loop takes `t_x` projected ascent steps on `(X, s)` at fixed
//! prices; the outer loop then moves prices against excess supply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{
    norm2, savings_marginal, stage_objective, FisherMarket, MarketState, StageAction, UtilityClass,
    DEFAULT_UTILITY_FLOOR,
};
use crate::game::StateValueFunction;
use crate::oracles::projection::project_budget_set;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdaConfig {
    pub eta_p: f64,
    pub eta_x: f64,
    pub t_p: usize,
    pub t_x: usize,
    /// Stop once `‖Σ_i X_i - q‖₂` drops below this after an inner loop.
    pub excess_demand_break: f64,
    #[serde(default = "default_floor")]
    pub utility_floor: f64,
}

fn default_floor() -> f64 {
    DEFAULT_UTILITY_FLOOR
}

impl Default for GdaConfig {
    fn default() -> Self {
        Self::small_market(UtilityClass::Linear)
    }
}

impl GdaConfig {
    fn with_rates(eta_x: f64, eta_p: f64) -> Self {
        Self {
            eta_p,
            eta_x,
            t_p: 60,
            t_x: 100,
            excess_demand_break: 0.01,
            utility_floor: DEFAULT_UTILITY_FLOOR,
        }
    }

    /// Step sizes for the two-buyer markets without interest.
    pub fn small_market(class: UtilityClass) -> Self {
        match class {
            UtilityClass::Linear => Self::with_rates(1.4, 1.5e-2),
            UtilityClass::Leontief => Self::with_rates(1.5, 6.5e-4),
            UtilityClass::CobbDouglas => Self::with_rates(1.4, 5e-3),
        }
    }

    /// Step sizes for the five-buyer markets with random interest.
    pub fn big_market(class: UtilityClass) -> Self {
        match class {
            UtilityClass::Linear => Self::with_rates(1.7, 2e-2),
            UtilityClass::Leontief => Self::with_rates(2.0, 5e-5),
            UtilityClass::CobbDouglas => Self::with_rates(1.8, 2.5e-2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta_p > 0.0 && self.eta_p.is_finite()) {
            return Err(Error::domain(
                "eta_p",
                format!("{} must be positive", self.eta_p),
            ));
        }
        if !(self.eta_x > 0.0 && self.eta_x.is_finite()) {
            return Err(Error::domain(
                "eta_x",
                format!("{} must be positive", self.eta_x),
            ));
        }
        if self.t_p == 0 {
            return Err(Error::domain("t_p", "need at least one outer iteration"));
        }
        if self.t_x == 0 {
            return Err(Error::domain("t_x", "need at least one inner iteration"));
        }
        if !(self.excess_demand_break >= 0.0) {
            return Err(Error::domain("excess_demand_break", "must be >= 0"));
        }
        if !(self.utility_floor > 0.0) {
            return Err(Error::domain("utility_floor", "must be positive"));
        }
        Ok(())
    }
}

/// Result of one stage solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePoint {
    pub prices: Vec<f64>,
    pub alloc: Vec<Vec<f64>>,
    pub savings: Vec<f64>,
    /// Stage objective, continuation included, at the returned point.
    pub value: f64,
    /// Outer iterations run, counting the one that triggered the break.
    pub outer_iters: usize,
    pub excess_norm: f64,
    /// Whether the excess-demand break fired.
    pub converged: bool,
}

impl StagePoint {
    pub fn action(&self) -> StageAction {
        StageAction {
            prices: self.prices.clone(),
            alloc: self.alloc.clone(),
            savings: self.savings.clone(),
        }
    }
}

/// Cold start: the price vector that clears a Cobb-Douglas market with
/// the buyers' normalized valuations as exponents, each buyer spreading
/// its budget evenly over the goods, and no savings.
pub fn cold_start(market: &FisherMarket, state: &MarketState) -> StageAction {
    let m = market.n_goods();
    let mut prices = vec![0.0; m];
    for (u, &b) in market.utilities.iter().zip(&state.budgets) {
        let total: f64 = u.theta.iter().sum();
        for (p, t) in prices.iter_mut().zip(&u.theta) {
            *p += b * t / total;
        }
    }
    for (p, q) in prices.iter_mut().zip(&state.supply) {
        *p /= q;
    }
    let alloc = state
        .budgets
        .iter()
        .map(|&b| {
            prices
                .iter()
                .map(|&p| if p > 0.0 { b / m as f64 / p } else { 0.0 })
                .collect()
        })
        .collect();
    StageAction {
        prices,
        alloc,
        savings: vec![0.0; market.n_buyers()],
    }
}

fn check_finite(action: &StageAction, iteration: usize, what: &str) -> Result<()> {
    let finite = action.prices.iter().all(|v| v.is_finite())
        && action.savings.iter().all(|v| v.is_finite())
        && action.alloc.iter().flatten().all(|v| v.is_finite());
    if finite {
        Ok(())
    } else {
        Err(Error::NonFiniteIterate {
            iteration,
            context: format!("nested GDA {what}"),
        })
    }
}

/// Runs nested GDA at `state` under continuation value `v`.
///
/// `warm` seeds the iterate (it is projected onto the current budget set
/// first); otherwise [`cold_start`] is used. The outer loop skips its last
/// price step so the returned allocations are feasible at the returned
/// prices.
pub fn nested_gda_fisher(
    market: &FisherMarket,
    state: &MarketState,
    v: &StateValueFunction,
    cfg: &GdaConfig,
    warm: Option<&StageAction>,
) -> Result<StagePoint> {
    cfg.validate()?;
    let n = market.n_buyers();
    let m = market.n_goods();
    if state.budgets.len() != n || state.supply.len() != m {
        return Err(Error::InvalidMarket(format!(
            "state has {} budgets and {} goods for a {n}x{m} market",
            state.budgets.len(),
            state.supply.len()
        )));
    }
    let marginal = savings_marginal(market, v)?;

    let start = match warm {
        Some(w) if w.prices.len() == m && w.alloc.len() == n && w.savings.len() == n => w.clone(),
        _ => cold_start(market, state),
    };
    let mut prices: Vec<f64> = start.prices.iter().map(|p| p.max(0.0)).collect();
    let (mut alloc, mut savings) =
        project_budget_set(&start.alloc, &start.savings, &prices, &state.budgets);

    let mut excess = vec![0.0; m];
    let mut excess_norm = f64::INFINITY;
    let mut converged = false;
    let mut outer_iters = 0;
    for t in 1..=cfg.t_p {
        outer_iters = t;
        for _ in 0..cfg.t_x {
            for i in 0..n {
                let u = &market.utilities[i];
                let x = &mut alloc[i];
                let weight = (state.budgets[i] - savings[i]) / u.value(x).max(cfg.utility_floor);
                let grad = u.gradient(x);
                for (xj, gj) in x.iter_mut().zip(grad) {
                    *xj += cfg.eta_x * weight * gj;
                }
                let log_u = u.value(x).max(cfg.utility_floor).ln();
                savings[i] += cfg.eta_x * (-log_u + marginal[i]);
            }
            (alloc, savings) = project_budget_set(&alloc, &savings, &prices, &state.budgets);
        }
        for (j, z) in excess.iter_mut().enumerate() {
            *z = alloc.iter().map(|x| x[j]).sum::<f64>() - state.supply[j];
        }
        excess_norm = norm2(&excess);
        if !excess_norm.is_finite() {
            return Err(Error::NonFiniteIterate {
                iteration: t,
                context: "nested GDA allocations".into(),
            });
        }
        if excess_norm < cfg.excess_demand_break {
            converged = true;
            break;
        }
        if t < cfg.t_p {
            for (p, z) in prices.iter_mut().zip(&excess) {
                *p = (*p + cfg.eta_p * z).max(0.0);
            }
        }
    }

    let action = StageAction {
        prices,
        alloc,
        savings,
    };
    check_finite(&action, outer_iters, "iterate")?;
    let value = stage_objective(market, state, &action, v, cfg.utility_floor)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteIterate {
            iteration: outer_iters,
            context: "nested GDA stage value".into(),
        });
    }
    Ok(StagePoint {
        prices: action.prices,
        alloc: action.alloc,
        savings: action.savings,
        value,
        outer_iters,
        excess_norm,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{BudgetDynamics, UtilitySpec};

    fn one_by_one(b: f64) -> FisherMarket {
        FisherMarket::new(
            vec![UtilitySpec::linear(vec![1.0]).unwrap()],
            vec![1.0],
            0.9,
            BudgetDynamics::default(),
            vec![b],
        )
        .unwrap()
    }

    #[test]
    fn closed_form_single_buyer() {
        for b in [0.5, 1.0, 2.0] {
            let m = one_by_one(b);
            let pt = nested_gda_fisher(
                &m,
                &m.initial_state(),
                &StateValueFunction::linear_zero(1),
                &GdaConfig::default(),
                None,
            )
            .unwrap();
            assert!((pt.prices[0] - b).abs() < 1e-2, "b={b}: {pt:?}");
            assert!((pt.alloc[0][0] - 1.0).abs() < 1e-2);
            assert!(pt.savings[0] < 1e-2);
        }
    }

    #[test]
    fn zero_budget_buyer_stays_at_zero() {
        let m = FisherMarket::new(
            vec![UtilitySpec::linear(vec![1.0, 2.0]).unwrap(); 2],
            vec![1.0, 1.0],
            0.9,
            BudgetDynamics::default(),
            vec![0.0, 5.0],
        )
        .unwrap();
        let cfg = GdaConfig {
            t_p: 3,
            ..GdaConfig::default()
        };
        let pt = nested_gda_fisher(
            &m,
            &m.initial_state(),
            &StateValueFunction::linear_zero(2),
            &cfg,
            None,
        )
        .unwrap();
        assert_eq!(pt.alloc[0], vec![0.0, 0.0]);
        assert_eq!(pt.savings[0], 0.0);
    }

    #[test]
    fn rejects_tabular_value() {
        let m = one_by_one(1.0);
        let err = nested_gda_fisher(
            &m,
            &m.initial_state(),
            &StateValueFunction::zeros(1),
            &GdaConfig::default(),
            None,
        )
        .unwrap_err();
        assert_eq!(err.kind(), "unsupported_value_function");
    }

    #[test]
    fn huge_steps_report_non_finite() {
        let m = one_by_one(1.0);
        let cfg = GdaConfig {
            eta_p: f64::MAX,
            t_p: 5,
            t_x: 1,
            ..GdaConfig::default()
        };
        let v = StateValueFunction::LinearInBudget {
            a: vec![f64::MAX],
            c: 0.0,
        };
        let err = nested_gda_fisher(&m, &m.initial_state(), &v, &cfg, None).unwrap_err();
        assert_eq!(err.kind(), "non_finite");
    }

    #[test]
    fn config_validation() {
        assert!(GdaConfig {
            t_x: 0,
            ..GdaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GdaConfig {
            eta_p: 0.0,
            ..GdaConfig::default()
        }
        .validate()
        .is_err());
        assert!(GdaConfig::big_market(UtilityClass::Leontief)
            .validate()
            .is_ok());
    }
}
