//! Greedy rollouts and exploitability of a market solution.
//!
//! Two distances are reported:
//!
//! * distance to utility maximization, `‖û - u*‖₂ / ‖u*‖₂`, where `û_i` is
//!   buyer `i`'s discounted utility along the rollout and `u*_i` the best
//!   it could do facing the same prices and interest realizations;
//! * distance to market clearance, the mean excess-demand norm per step.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{
    norm2, state_residuals, transition_sample, FisherMarket, RecceConfig, StageAction,
    UtilityClass, UtilitySpec,
};
use crate::game::StateValueFunction;
use crate::oracles::gda::{nested_gda_fisher, GdaConfig};
use crate::oracles::projection::project_halfspace_orthant;
use crate::seed::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutStep {
    pub t: usize,
    pub budgets: Vec<f64>,
    pub prices: Vec<f64>,
    pub alloc: Vec<Vec<f64>>,
    pub savings: Vec<f64>,
    /// Interest rate applied to this step's savings.
    pub rate: f64,
    pub excess_norm: f64,
    pub converged: bool,
}

impl RolloutStep {
    pub fn action(&self) -> StageAction {
        StageAction {
            prices: self.prices.clone(),
            alloc: self.alloc.clone(),
            savings: self.savings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<RolloutStep>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn prices(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.prices.clone()).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.rate).collect()
    }
}

/// Unrolls the greedy policy of `v` for `horizon` steps from the market's
/// initial budgets. Each stage solve is warm-started from the previous
/// step's action (the first from `warm`, if given). Interest rates are
/// drawn from the stream `(seed, "rollout", path)`.
pub fn rollout_greedy(
    market: &FisherMarket,
    v: &StateValueFunction,
    gda: &GdaConfig,
    horizon: usize,
    seed: u64,
    path: u64,
    warm: Option<&StageAction>,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::domain("horizon", "must be >= 1"));
    }
    let mut rng = stream(seed, "rollout", path);
    let mut state = market.initial_state();
    let mut prev = warm.cloned();
    let mut steps = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let point =
            nested_gda_fisher(market, &state, v, gda, prev.as_ref()).map_err(|e| e.at_step(t))?;
        let (next, rate) = transition_sample(market, &state, &point.savings, &mut rng);
        prev = Some(point.action());
        steps.push(RolloutStep {
            t,
            budgets: std::mem::replace(&mut state, next).budgets,
            prices: point.prices,
            alloc: point.alloc,
            savings: point.savings,
            rate,
            excess_norm: point.excess_norm,
            converged: point.converged,
        });
    }
    Ok(Trajectory { steps })
}

/// `Σ_t γ^t u_i(X_i^t)` along the trajectory.
pub fn cumulative_utility(market: &FisherMarket, traj: &Trajectory, buyer: usize) -> f64 {
    let u = &market.utilities[buyer];
    let mut disc = 1.0;
    let mut total = 0.0;
    for step in &traj.steps {
        total += disc * u.value(&step.alloc[buyer]);
        disc *= market.discount;
    }
    total
}

/// `‖û - u*‖₂ / ‖u*‖₂`.
pub fn distance_to_um(u_hat: &[f64], u_star: &[f64]) -> Result<f64> {
    if u_hat.len() != u_star.len() {
        return Err(Error::domain("u_hat", "length differs from u_star"));
    }
    let denom = norm2(u_star);
    if !(denom > 0.0) {
        return Err(Error::domain(
            "u_star",
            "best-response utilities are all zero",
        ));
    }
    let diff: Vec<f64> = u_hat.iter().zip(u_star).map(|(a, b)| a - b).collect();
    Ok(norm2(&diff) / denom)
}

/// Mean over steps of `‖Σ_i X_i^t - q‖₂`; zero for an empty trajectory.
pub fn distance_to_mc(traj: &Trajectory, supply: &[f64]) -> f64 {
    if traj.is_empty() {
        return 0.0;
    }
    let total: f64 = traj
        .steps
        .iter()
        .map(|s| norm2(&s.action().excess_demand(supply)))
        .sum();
    total / traj.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestResponseConfig {
    /// Random interior starts, in addition to the demand start, the
    /// spend-or-save plan and the realized play.
    pub n_starts: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for BestResponseConfig {
    fn default() -> Self {
        Self {
            n_starts: 8,
            max_iters: 2000,
            seed: 0,
        }
    }
}

/// One buyer's consumption-savings program against a fixed price path,
/// in budget-share coordinates: row `t` holds the spend shares of the `m`
/// goods followed by the savings share, with `w >= 0, Σ w <= 1`.
struct SharesProgram<'a> {
    utility: &'a UtilitySpec,
    prices: &'a [Vec<f64>],
    rates: &'a [f64],
    b0: f64,
    replenish: f64,
    gamma: f64,
}

impl SharesProgram<'_> {
    fn horizon(&self) -> usize {
        self.prices.len()
    }

    fn bundle(&self, t: usize, w: &[f64], b: f64) -> Vec<f64> {
        self.prices[t]
            .iter()
            .zip(w)
            .map(|(p, wj)| wj * b / p)
            .collect()
    }

    fn budgets(&self, w: &[Vec<f64>]) -> Vec<f64> {
        let m = self.utility.n_goods();
        let mut b = Vec::with_capacity(self.horizon());
        let mut cur = self.b0;
        for (t, row) in w.iter().enumerate() {
            b.push(cur);
            if t + 1 < w.len() {
                cur = self.replenish + self.rates[t] * row[m] * cur;
            }
        }
        b
    }

    fn value(&self, w: &[Vec<f64>]) -> f64 {
        let b = self.budgets(w);
        let mut disc = 1.0;
        let mut total = 0.0;
        for t in 0..self.horizon() {
            total += disc * self.utility.value(&self.bundle(t, &w[t], b[t]));
            disc *= self.gamma;
        }
        total
    }

    /// Gradient by a backward pass on `λ_t = ∂J/∂b_t`.
    fn gradient(&self, w: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = self.utility.n_goods();
        let horizon = self.horizon();
        let b = self.budgets(w);
        let mut grad = vec![vec![0.0; m + 1]; horizon];
        let mut lambda_next = 0.0;
        for t in (0..horizon).rev() {
            let disc = self.gamma.powi(t as i32);
            let du = self.utility.gradient(&self.bundle(t, &w[t], b[t]));
            let mut lambda = 0.0;
            for j in 0..m {
                let p = self.prices[t][j];
                grad[t][j] = disc * du[j] * b[t] / p;
                lambda += disc * du[j] * w[t][j] / p;
            }
            if t + 1 < horizon {
                grad[t][m] = lambda_next * self.rates[t] * b[t];
                lambda += lambda_next * self.rates[t] * w[t][m];
            }
            lambda_next = lambda;
        }
        grad
    }

    fn project(&self, w: &mut [Vec<f64>]) {
        for row in w.iter_mut() {
            let ones = vec![1.0; row.len()];
            *row = project_halfspace_orthant(row, &ones, 1.0);
        }
    }

    /// Projected ascent with an adaptive step; only improving steps are
    /// taken, so the result never falls below the start's value.
    fn ascend(&self, mut w: Vec<Vec<f64>>, max_iters: usize) -> Result<f64> {
        self.project(&mut w);
        let mut value = self.value(&w);
        let mut grad = self.gradient(&w);
        let gmax = grad.iter().flatten().fold(0.0_f64, |a, g| a.max(g.abs()));
        let mut step = if gmax > 0.0 { 0.1 / gmax } else { 1.0 };
        for _ in 0..max_iters {
            let mut cand: Vec<Vec<f64>> = w
                .iter()
                .zip(&grad)
                .map(|(row, g)| row.iter().zip(g).map(|(a, b)| a + step * b).collect())
                .collect();
            self.project(&mut cand);
            let cand_value = self.value(&cand);
            if !cand_value.is_finite() {
                return Err(Error::NonFiniteIterate {
                    iteration: 0,
                    context: "best-response ascent".into(),
                });
            }
            if cand_value > value {
                let gain = cand_value - value;
                w = cand;
                value = cand_value;
                grad = self.gradient(&w);
                step *= 2.0;
                if gain <= 1e-13 * value.abs().max(1.0) {
                    break;
                }
            } else {
                step *= 0.5;
                if step < 1e-300 {
                    break;
                }
            }
        }
        Ok(value)
    }

    /// Static demand spending the whole budget, no savings.
    fn demand_start(&self) -> Vec<Vec<f64>> {
        let m = self.utility.n_goods();
        let theta = &self.utility.theta;
        self.prices
            .iter()
            .map(|p| {
                let mut row = vec![0.0; m + 1];
                match self.utility.class {
                    UtilityClass::Linear => {
                        let mut best = 0;
                        for j in 1..m {
                            if theta[j] / p[j] > theta[best] / p[best] {
                                best = j;
                            }
                        }
                        row[best] = 1.0;
                    }
                    UtilityClass::CobbDouglas => row[..m].copy_from_slice(theta),
                    UtilityClass::Leontief => {
                        let total: f64 = theta.iter().zip(p).map(|(t, pj)| t * pj).sum();
                        for j in 0..m {
                            row[j] = theta[j] * p[j] / total;
                        }
                    }
                }
                row
            })
            .collect()
    }

    /// Spend-or-save plan from the backward recursion on the value of one
    /// unit of money, `μ_t = max(γ^t β_t, ρ_t μ_{t+1})`, where `β_t` is the
    /// utility of spending one unit on static demand. Exact for utilities
    /// homogeneous of degree one.
    fn plan_start(&self) -> Vec<Vec<f64>> {
        let m = self.utility.n_goods();
        let demand = self.demand_start();
        let mut plan = demand.clone();
        let mut mu_next = 0.0;
        for t in (0..self.horizon()).rev() {
            let spend =
                self.gamma.powi(t as i32) * self.utility.value(&self.bundle(t, &demand[t], 1.0));
            let save = if t + 1 < self.horizon() {
                self.rates[t] * mu_next
            } else {
                0.0
            };
            if save > spend {
                plan[t] = vec![0.0; m + 1];
                plan[t][m] = 1.0;
            }
            mu_next = spend.max(save);
        }
        plan
    }
}

fn check_price_path(market: &FisherMarket, prices: &[Vec<f64>], rates: &[f64]) -> Result<()> {
    if prices.is_empty() {
        return Err(Error::domain("prices", "empty price path"));
    }
    if rates.len() + 1 < prices.len() {
        return Err(Error::domain(
            "rates",
            "need a rate for every step but the last",
        ));
    }
    for p in prices {
        if p.len() != market.n_goods() {
            return Err(Error::domain("prices", "wrong number of goods"));
        }
        if p.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::domain(
                "prices",
                "a zero price makes the best response unbounded",
            ));
        }
    }
    Ok(())
}

/// Budget shares of buyer `i`'s realized play, usable as an ascent start.
pub fn realized_shares(traj: &Trajectory, buyer: usize) -> Vec<Vec<f64>> {
    traj.steps
        .iter()
        .map(|s| {
            let b = s.budgets[buyer];
            let mut row: Vec<f64> = s.alloc[buyer]
                .iter()
                .zip(&s.prices)
                .map(|(x, p)| if b > 0.0 { x * p / b } else { 0.0 })
                .collect();
            row.push(if b > 0.0 { s.savings[buyer] / b } else { 0.0 });
            row
        })
        .collect()
}

/// Best discounted utility buyer `buyer` can reach from its initial budget
/// against the price path, with savings growing at the given per-step
/// rates. Projected gradient ascent over the whole horizon from the static
/// demand start, the spend-or-save plan, `n_starts` random interior starts
/// and `realized`, if given; returns the best value found.
pub fn best_response_value(
    market: &FisherMarket,
    buyer: usize,
    prices: &[Vec<f64>],
    rates: &[f64],
    cfg: &BestResponseConfig,
    realized: Option<&[Vec<f64>]>,
) -> Result<f64> {
    check_price_path(market, prices, rates)?;
    let program = SharesProgram {
        utility: &market.utilities[buyer],
        prices,
        rates,
        b0: market.initial_budgets[buyer],
        replenish: market.dynamics.replenish,
        gamma: market.discount,
    };
    let m = market.n_goods();
    let horizon = prices.len();
    let mut starts = vec![program.demand_start(), program.plan_start()];
    let mut rng = stream(cfg.seed, "best-response", buyer as u64);
    for _ in 0..cfg.n_starts {
        starts.push(
            (0..horizon)
                .map(|_| {
                    // Uniform on the simplex {w >= 0, Σ w <= 1}: normalized
                    // exponentials with one slack coordinate dropped.
                    let e: Vec<f64> = (0..m + 2)
                        .map(|_| -(1.0 - rng.random::<f64>()).ln())
                        .collect();
                    let total: f64 = e.iter().sum();
                    e[..m + 1].iter().map(|v| v / total).collect()
                })
                .collect(),
        );
    }
    if let Some(r) = realized {
        starts.push(r.to_vec());
    }
    let values = starts
        .into_par_iter()
        .map(|w| program.ascend(w, cfg.max_iters))
        .collect::<Result<Vec<_>>>()?;
    Ok(values.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Dynamic program over a savings grid with `resolution` points on
/// `[0, b_t]` and linear interpolation across a budget grid; linear
/// utilities only.
pub fn best_response_grid_dp(
    market: &FisherMarket,
    buyer: usize,
    prices: &[Vec<f64>],
    rates: &[f64],
    resolution: usize,
) -> Result<f64> {
    check_price_path(market, prices, rates)?;
    let u = &market.utilities[buyer];
    if u.class != UtilityClass::Linear {
        return Err(Error::domain(
            "utility",
            "savings-grid DP supports linear utilities only",
        ));
    }
    if resolution < 2 {
        return Err(Error::domain("resolution", "need at least 2 grid points"));
    }
    let horizon = prices.len();
    let replenish = market.dynamics.replenish;
    // Utility per unit of money spent at step t.
    let bang: Vec<f64> = prices
        .iter()
        .map(|p| {
            u.scale
                * u.theta
                    .iter()
                    .zip(p)
                    .map(|(t, pj)| t / pj)
                    .fold(0.0, f64::max)
        })
        .collect();
    // Reachable budget range per step.
    let mut upper = vec![market.initial_budgets[buyer]; horizon];
    for t in 1..horizon {
        upper[t] = replenish + rates[t - 1] * upper[t - 1];
    }
    let grid = |t: usize| -> Vec<f64> {
        if t == 0 {
            return vec![upper[0]];
        }
        let lo = replenish;
        (0..resolution)
            .map(|k| lo + (upper[t] - lo) * k as f64 / (resolution - 1) as f64)
            .collect()
    };
    let interp = |xs: &[f64], ys: &[f64], x: f64| -> f64 {
        if xs.len() == 1 || x <= xs[0] {
            return ys[0];
        }
        let last = xs.len() - 1;
        if x >= xs[last] {
            return ys[last];
        }
        let h = xs[1] - xs[0];
        let k = (((x - xs[0]) / h).floor() as usize).min(last - 1);
        let frac = (x - xs[k]) / h;
        ys[k] + frac * (ys[k + 1] - ys[k])
    };

    let mut next_grid: Vec<f64> = Vec::new();
    let mut next_vals: Vec<f64> = Vec::new();
    for t in (0..horizon).rev() {
        let disc = market.discount.powi(t as i32);
        let budgets = grid(t);
        let vals: Vec<f64> = budgets
            .iter()
            .map(|&b| {
                (0..resolution)
                    .map(|k| {
                        let s = b * k as f64 / (resolution - 1) as f64;
                        let cont = if t + 1 < horizon {
                            interp(&next_grid, &next_vals, replenish + rates[t] * s)
                        } else {
                            0.0
                        };
                        disc * bang[t] * (b - s) + cont
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        next_grid = budgets;
        next_vals = vals;
    }
    Ok(next_vals[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub horizon: usize,
    /// Extra independent rollouts averaged for stochastic interest rates.
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub best_response: BestResponseConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizon: 50,
            n_paths: 10,
            seed: 0,
            best_response: BestResponseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuyerReport {
    pub buyer: usize,
    pub u_hat: f64,
    pub u_star: f64,
    /// Averages over `n_paths` rollouts; equal to the single-path values
    /// when interest is deterministic.
    pub u_hat_avg: f64,
    pub u_star_avg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub buyers: Vec<BuyerReport>,
    pub distance_to_um: f64,
    pub distance_to_mc: f64,
    pub distance_to_um_avg: f64,
    pub distance_to_mc_avg: f64,
    /// Largest Walras residual along the rollout.
    pub walras_residual: f64,
    /// Largest bang-per-buck spread along the rollout.
    pub bpb_spread: f64,
    /// Largest saving-condition residual along the rollout, measured with
    /// the social value function's budget slope.
    pub saving_residual: f64,
    /// Rollout steps with a buyer whose spend is at the utility floor.
    pub degenerate_steps: usize,
    pub trajectory: Trajectory,
}

struct PathScores {
    u_hat: Vec<f64>,
    u_star: Vec<f64>,
    mc: f64,
}

fn score_path(
    market: &FisherMarket,
    traj: &Trajectory,
    cfg: &BestResponseConfig,
) -> Result<PathScores> {
    let prices = traj.prices();
    // The buyer plans against the price path without seeing future rates.
    // Value is linear in money for homogeneous utilities, so the best such
    // plan earns the expected rate on savings.
    let rates = vec![market.dynamics.expected_rate(); traj.len()];
    let n = market.n_buyers();
    let u_hat: Vec<f64> = (0..n)
        .map(|i| cumulative_utility(market, traj, i))
        .collect();
    let u_star = (0..n)
        .map(|i| {
            let realized = realized_shares(traj, i);
            best_response_value(market, i, &prices, &rates, cfg, Some(&realized))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PathScores {
        u_hat,
        u_star,
        mc: distance_to_mc(traj, &market.supply),
    })
}

/// Rolls out the greedy policy of `v`, scores it, and averages the scores
/// over further paths when interest is random.
pub fn evaluate(
    market: &FisherMarket,
    v: &StateValueFunction,
    gda: &GdaConfig,
    cfg: &EvalConfig,
    warm: Option<&StageAction>,
) -> Result<EquilibriumReport> {
    let traj = rollout_greedy(market, v, gda, cfg.horizon, cfg.seed, 0, warm)?;
    let main = score_path(market, &traj, &cfg.best_response)?;

    let mut hat_sum = main.u_hat.clone();
    let mut star_sum = main.u_star.clone();
    let mut um_sum = distance_to_um(&main.u_hat, &main.u_star)?;
    let mut mc_sum = main.mc;
    let mut paths = 1;
    if !market.dynamics.is_deterministic() && cfg.n_paths > 1 {
        let extra = (1..cfg.n_paths as u64)
            .into_par_iter()
            .map(|path| {
                let t = rollout_greedy(market, v, gda, cfg.horizon, cfg.seed, path, warm)?;
                score_path(market, &t, &cfg.best_response)
            })
            .collect::<Result<Vec<_>>>()?;
        for s in extra {
            for i in 0..market.n_buyers() {
                hat_sum[i] += s.u_hat[i];
                star_sum[i] += s.u_star[i];
            }
            um_sum += distance_to_um(&s.u_hat, &s.u_star)?;
            mc_sum += s.mc;
            paths += 1;
        }
    }
    let k = paths as f64;

    let recce = RecceConfig {
        utility_floor: gda.utility_floor,
        ..RecceConfig::default()
    };
    let mut walras = 0.0_f64;
    let mut bpb = 0.0_f64;
    let mut saving = 0.0_f64;
    let mut degenerate_steps = 0;
    for step in &traj.steps {
        let r = state_residuals(
            market,
            v,
            &market.state(step.budgets.clone()),
            &step.action(),
            &recce,
        )?;
        walras = walras.max(r.walras);
        bpb = bpb.max(r.max_bpb_spread());
        saving = saving.max(r.max_saving());
        if !r.degenerate_buyers.is_empty() {
            degenerate_steps += 1;
        }
    }

    let buyers = (0..market.n_buyers())
        .map(|i| BuyerReport {
            buyer: i,
            u_hat: main.u_hat[i],
            u_star: main.u_star[i],
            u_hat_avg: hat_sum[i] / k,
            u_star_avg: star_sum[i] / k,
        })
        .collect();
    Ok(EquilibriumReport {
        buyers,
        distance_to_um: distance_to_um(&main.u_hat, &main.u_star)?,
        distance_to_mc: main.mc,
        distance_to_um_avg: um_sum / k,
        distance_to_mc_avg: mc_sum / k,
        walras_residual: walras,
        bpb_spread: bpb,
        saving_residual: saving,
        degenerate_steps,
        trajectory: traj,
    })
}
