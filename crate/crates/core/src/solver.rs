//! Value iteration: exact over finite states, fitted over continuous
//! budgets with a linear value function.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{FisherMarket, StageAction};
use crate::game::{apply_operator, MinMaxOracle, StateValueFunction, StochasticGame};
use crate::oracles::gda::{nested_gda_fisher, GdaConfig, StagePoint};
use crate::seed::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViConfig {
    pub max_iters: usize,
    #[serde(default = "default_sup_norm_tol")]
    pub sup_norm_tol: f64,
    #[serde(default)]
    pub record_trajectory: bool,
}

fn default_sup_norm_tol() -> f64 {
    1e-8
}

impl Default for ViConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            sup_norm_tol: default_sup_norm_tol(),
            record_trajectory: false,
        }
    }
}

impl ViConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::domain("max_iters", "must be >= 1"));
        }
        if !(self.sup_norm_tol >= 0.0) {
            return Err(Error::domain("sup_norm_tol", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViResult {
    pub v_final: StateValueFunction,
    /// `v_0, v_1, ...` when trajectory recording is on, else empty.
    pub iterates: Vec<StateValueFunction>,
    /// `‖v_{k+1} - v_k‖∞` per applied step.
    pub deltas: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Iterates `v ← T v` until the sup-norm step drops below
/// `cfg.sup_norm_tol` or `cfg.max_iters` steps have run.
pub fn value_iteration(
    game: &StochasticGame,
    oracle: &dyn MinMaxOracle,
    v0: &StateValueFunction,
    cfg: &ViConfig,
) -> Result<ViResult> {
    cfg.validate()?;
    match v0.as_table() {
        Some(t) if t.len() == game.n_states() => {}
        _ => {
            return Err(Error::UnsupportedValueFunction(format!(
                "value iteration needs a table with {} entries",
                game.n_states()
            )))
        }
    }
    let mut v = v0.clone();
    let mut iterates = Vec::new();
    if cfg.record_trajectory {
        iterates.push(v.clone());
    }
    let mut deltas = Vec::new();
    let mut converged = false;
    for k in 0..cfg.max_iters {
        let next = apply_operator(game, &v, oracle).map_err(|e| e.at_iteration(k + 1))?;
        let delta = next.sup_distance(&v).unwrap_or(f64::INFINITY);
        deltas.push(delta);
        v = next;
        if cfg.record_trajectory {
            iterates.push(v.clone());
        }
        if delta < cfg.sup_norm_tol {
            converged = true;
            break;
        }
    }
    Ok(ViResult {
        v_final: v,
        iterates,
        iterations: deltas.len(),
        deltas,
        converged,
    })
}

/// Smallest `k >= (1/(1-γ)) ln(r̄ / (ε (1-γ)))`, clamped at zero.
pub fn iterations_needed(epsilon: f64, gamma: f64, reward_bound: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(
            "epsilon",
            format!("{epsilon} must be positive"),
        ));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::domain("gamma", format!("{gamma} not in (0, 1)")));
    }
    if !(reward_bound > 0.0 && reward_bound.is_finite()) {
        return Err(Error::domain(
            "reward_bound",
            format!("{reward_bound} must be positive"),
        ));
    }
    let raw = (reward_bound / (epsilon * (1.0 - gamma))).ln() / (1.0 - gamma);
    // Absorb rounding when the bound lands on an integer.
    Ok((raw - 1e-9).ceil().max(0.0) as u64)
}

/// A per-budget stage solver for fitted value iteration.
pub trait StageSolver: Sync {
    fn n_buyers(&self) -> usize;

    fn solve_stage(
        &self,
        budgets: &[f64],
        v: &StateValueFunction,
        warm: Option<&StageAction>,
    ) -> Result<StagePoint>;
}

/// Nested GDA on a Fisher market.
#[derive(Debug, Clone)]
pub struct GdaStageSolver<'a> {
    pub market: &'a FisherMarket,
    pub gda: GdaConfig,
}

impl StageSolver for GdaStageSolver<'_> {
    fn n_buyers(&self) -> usize {
        self.market.n_buyers()
    }

    fn solve_stage(
        &self,
        budgets: &[f64],
        v: &StateValueFunction,
        warm: Option<&StageAction>,
    ) -> Result<StagePoint> {
        nested_gda_fisher(
            self.market,
            &self.market.state(budgets.to_vec()),
            v,
            &self.gda,
            warm,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FittedViConfig {
    pub n_budget_samples: usize,
    pub budget_box: (f64, f64),
    pub n_value_iters: usize,
    pub seed: u64,
    /// Seed each stage solve from the nearest budget of the previous
    /// iteration.
    #[serde(default)]
    pub warm_start: bool,
}

impl Default for FittedViConfig {
    fn default() -> Self {
        Self {
            n_budget_samples: 25,
            budget_box: (9.0, 10.0),
            n_value_iters: 30,
            seed: 0,
            warm_start: false,
        }
    }
}

impl FittedViConfig {
    pub fn validate(&self, n_buyers: usize) -> Result<()> {
        if self.n_budget_samples <= n_buyers + 1 {
            return Err(Error::domain(
                "n_budget_samples",
                format!(
                    "{} samples cannot identify {} coefficients",
                    self.n_budget_samples,
                    n_buyers + 1
                ),
            ));
        }
        let (lo, hi) = self.budget_box;
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::domain(
                "budget_box",
                format!("need 0 <= lower < upper, got ({lo}, {hi})"),
            ));
        }
        if self.n_value_iters == 0 {
            return Err(Error::domain("n_value_iters", "must be >= 1"));
        }
        Ok(())
    }
}

/// Diagnostics of one fitted iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitIteration {
    pub iter: usize,
    /// Mean stage value over this iteration's samples.
    pub mean_value: f64,
    pub a: Vec<f64>,
    pub c: f64,
    pub max_residual: f64,
    /// Fraction of stage solves that hit the excess-demand break.
    pub converged_fraction: f64,
}

/// A solved sample: its budgets and the stage action found there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmEntry {
    pub budgets: Vec<f64>,
    pub action: StageAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedViResult {
    pub v: StateValueFunction,
    pub trajectory: Vec<FitIteration>,
    /// Final iteration's solved samples, for warm-starting later solves.
    pub archive: Vec<WarmEntry>,
}

/// Nearest entry by Euclidean budget distance; lowest index on ties.
pub fn nearest_warm<'a>(archive: &'a [WarmEntry], budgets: &[f64]) -> Option<&'a StageAction> {
    let dist = |e: &WarmEntry| -> f64 {
        e.budgets
            .iter()
            .zip(budgets)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut best: Option<(&WarmEntry, f64)> = None;
    for e in archive {
        let d = dist(e);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((e, d));
        }
    }
    best.map(|(e, _)| &e.action)
}

const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares of `values` on features `(b, 1)`.
///
/// Returns `(a, c, max |residual|)`.
pub fn fit_linear(budgets: &[Vec<f64>], values: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    let rows = budgets.len();
    let n = budgets.first().map_or(0, Vec::len);
    let cols = n + 1;
    let design = DMatrix::from_fn(rows, cols, |r, c| if c < n { budgets[r][c] } else { 1.0 });
    let y = DVector::from_column_slice(values);
    let svd = design.clone().svd(true, true);
    let scale = svd.singular_values.max();
    let rank = svd.rank(RANK_TOL * scale.max(1.0));
    if rank < cols {
        return Err(Error::RegressionSingular { rank, cols });
    }
    let beta = svd
        .solve(&y, RANK_TOL * scale.max(1.0))
        .map_err(|e| Error::NonFinite(format!("least squares: {e}")))?;
    let residual = (&design * &beta - &y).amax();
    let a = beta.as_slice()[..n].to_vec();
    let c = beta[n];
    if !(c.is_finite() && a.iter().all(|v| v.is_finite())) {
        return Err(Error::NonFinite("regression coefficients".into()));
    }
    Ok((a, c, residual))
}

fn sample_budgets(cfg: &FittedViConfig, n: usize, purpose: &str, iter: usize) -> Vec<Vec<f64>> {
    let mut rng = stream(cfg.seed, purpose, iter as u64);
    let (lo, hi) = cfg.budget_box;
    (0..cfg.n_budget_samples)
        .map(|_| (0..n).map(|_| rng.random_range(lo..hi)).collect())
        .collect()
}

/// Fitted value iteration with nested GDA stage solves on `market`.
pub fn fitted_value_iteration(
    market: &FisherMarket,
    gda: &GdaConfig,
    cfg: &FittedViConfig,
) -> Result<FittedViResult> {
    gda.validate()?;
    fitted_value_iteration_with(
        &GdaStageSolver {
            market,
            gda: gda.clone(),
        },
        cfg,
    )
}

/// Fitted value iteration over any stage solver, starting from `V = 0`.
///
/// Each iteration draws fresh budgets uniformly from the box, solves every
/// stage under the current `V` in parallel, and refits `V(b) = a·b + c` by
/// least squares. A rank-deficient sample is redrawn once.
pub fn fitted_value_iteration_with(
    solver: &dyn StageSolver,
    cfg: &FittedViConfig,
) -> Result<FittedViResult> {
    let n = solver.n_buyers();
    cfg.validate(n)?;
    let mut v = StateValueFunction::linear_zero(n);
    let mut trajectory = Vec::with_capacity(cfg.n_value_iters);
    let mut archive: Vec<WarmEntry> = Vec::new();

    for k in 1..=cfg.n_value_iters {
        let solve_all = |budgets: &[Vec<f64>]| -> Result<Vec<StagePoint>> {
            budgets
                .par_iter()
                .map(|b| {
                    let warm = if cfg.warm_start {
                        nearest_warm(&archive, b)
                    } else {
                        None
                    };
                    solver.solve_stage(b, &v, warm)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at_iteration(k))
        };
        let mut budgets = sample_budgets(cfg, n, "fvi", k);
        let mut points = solve_all(&budgets)?;
        let mut values: Vec<f64> = points.iter().map(|p| p.value).collect();
        let fit = match fit_linear(&budgets, &values) {
            Err(Error::RegressionSingular { .. }) => {
                budgets = sample_budgets(cfg, n, "fvi-resample", k);
                points = solve_all(&budgets)?;
                values = points.iter().map(|p| p.value).collect();
                fit_linear(&budgets, &values)
            }
            other => other,
        }
        .map_err(|e| e.at_iteration(k))?;
        let (a, c, max_residual) = fit;

        let mean_value = values.iter().sum::<f64>() / values.len() as f64;
        let converged_fraction =
            points.iter().filter(|p| p.converged).count() as f64 / points.len() as f64;
        trajectory.push(FitIteration {
            iter: k,
            mean_value,
            a: a.clone(),
            c,
            max_residual,
            converged_fraction,
        });
        archive = budgets
            .into_iter()
            .zip(&points)
            .map(|(budgets, p)| WarmEntry {
                budgets,
                action: p.action(),
            })
            .collect();
        v = StateValueFunction::LinearInBudget { a, c };
    }
    Ok(FittedViResult {
        v,
        trajectory,
        archive,
    })
}
