use std::path::Path;

use stackgame::solver::nearest_warm;
use stackgame::{
    evaluate, fitted_value_iteration, iterations_needed, nested_gda_fisher, value_iteration,
    verify_recce, EquilibriumReport, FisherMarket, FittedViResult, GridOracle, MarketState,
    RecceConfig, StateValueFunction,
};

use crate::config::{Mode, RunConfig};
use crate::error::CliError;
use crate::output::{indexed, num, strings, CsvFile};

/// Runs a resolved config, writing artifacts under `cfg.out`. Returns the
/// lines to print on stdout.
pub fn run(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    if cfg.mode == Mode::Bound {
        let b = cfg.bound.as_ref().expect("resolved config");
        return Ok(vec![
            iterations_needed(b.epsilon, b.gamma, b.reward_bound)?.to_string()
        ]);
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    match cfg.mode {
        Mode::SolveGrid => solve_grid(cfg),
        Mode::SolveFisher => {
            let fit = solve_fisher(cfg)?;
            Ok(vec![fit_summary(&fit)])
        }
        Mode::Evaluate => {
            let fit = solve_fisher(cfg)?;
            let market = cfg.market.as_ref().expect("resolved config");
            let warm = nearest_warm(&fit.archive, &market.initial_budgets);
            let report = evaluate(
                market,
                &fit.v,
                cfg.gda.as_ref().expect("resolved config"),
                cfg.eval.as_ref().expect("resolved config"),
                warm,
            )?;
            write_rollout(&cfg.out, market, &report)?;
            write_report(&cfg.out, market, &report)?;
            Ok(vec![
                fit_summary(&fit),
                format!(
                    "distance_to_um={} distance_to_mc={}",
                    num(report.distance_to_um),
                    num(report.distance_to_mc)
                ),
            ])
        }
        Mode::Verify => {
            let fit = solve_fisher(cfg)?;
            verify(cfg, &fit)
        }
        Mode::Bound => unreachable!(),
    }
}

fn solve_grid(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    let game = cfg.game.as_ref().expect("resolved config").build()?;
    let oracle = GridOracle::new(cfg.grid.clone().expect("resolved config"))?;
    let vi = cfg.vi.as_ref().expect("resolved config");
    let out = value_iteration(
        &game,
        &oracle,
        &StateValueFunction::zeros(game.n_states()),
        vi,
    )?;

    let mut values = CsvFile::create(&cfg.out, "values.csv", &strings(["state", "value"]))?;
    for (s, v) in out.v_final.as_table().unwrap_or(&[]).iter().enumerate() {
        values.row(&[s.to_string(), num(*v)])?;
    }
    values.finish()?;
    let mut deltas = CsvFile::create(&cfg.out, "deltas.csv", &strings(["iter", "delta"]))?;
    for (k, d) in out.deltas.iter().enumerate() {
        deltas.row(&[(k + 1).to_string(), num(*d)])?;
    }
    deltas.finish()?;
    Ok(vec![format!(
        "iterations={} converged={}",
        out.iterations, out.converged
    )])
}

fn solve_fisher(cfg: &RunConfig) -> Result<FittedViResult, CliError> {
    let market = cfg.market.as_ref().expect("resolved config");
    market.validate()?;
    let fit = fitted_value_iteration(
        market,
        cfg.gda.as_ref().expect("resolved config"),
        cfg.fit.as_ref().expect("resolved config"),
    )?;
    let n = market.n_buyers();

    let mut header = strings(["iter", "mean_value"]);
    header.extend(indexed("fit_a", n));
    header.extend(strings(["fit_c", "max_residual", "converged_fraction"]));
    let mut traj = CsvFile::create(&cfg.out, "trajectory.csv", &header)?;
    for it in &fit.trajectory {
        let mut row = vec![it.iter.to_string(), num(it.mean_value)];
        row.extend(it.a.iter().map(|&a| num(a)));
        row.extend([num(it.c), num(it.max_residual), num(it.converged_fraction)]);
        traj.row(&row)?;
    }
    traj.finish()?;

    if let StateValueFunction::LinearInBudget { a, c } = &fit.v {
        let mut value = CsvFile::create(&cfg.out, "value.csv", &strings(["coefficient", "value"]))?;
        for (name, v) in indexed("a", n).zip(a) {
            value.row(&[name, num(*v)])?;
        }
        value.row(&["c".to_string(), num(*c)])?;
        value.finish()?;
    }
    Ok(fit)
}

fn fit_summary(fit: &FittedViResult) -> String {
    let last = fit.trajectory.last();
    format!(
        "fitted_iterations={} mean_value={}",
        fit.trajectory.len(),
        last.map_or_else(|| "nan".into(), |it| num(it.mean_value))
    )
}

fn write_rollout(
    dir: &Path,
    market: &FisherMarket,
    report: &EquilibriumReport,
) -> Result<(), CliError> {
    let (n, m) = (market.n_buyers(), market.n_goods());
    let mut header = strings(["t"]);
    header.extend(indexed("budget", n));
    header.extend(indexed("price", m));
    header.extend(indexed("saving", n));
    header.extend(strings(["excess_demand_norm", "realized_rate"]));
    let mut f = CsvFile::create(dir, "rollout.csv", &header)?;
    for s in &report.trajectory.steps {
        let mut row = vec![s.t.to_string()];
        row.extend(s.budgets.iter().map(|&v| num(v)));
        row.extend(s.prices.iter().map(|&v| num(v)));
        row.extend(s.savings.iter().map(|&v| num(v)));
        row.extend([num(s.excess_norm), num(s.rate)]);
        f.row(&row)?;
    }
    f.finish()
}

fn write_report(
    dir: &Path,
    market: &FisherMarket,
    report: &EquilibriumReport,
) -> Result<(), CliError> {
    let header = strings([
        "class",
        "buyer",
        "u_hat",
        "u_star",
        "u_hat_avg",
        "u_star_avg",
        "distance_to_um",
        "distance_to_mc",
        "distance_to_um_avg",
        "distance_to_mc_avg",
        "walras_residual",
        "bpb_spread",
        "saving_residual",
        "degenerate_steps",
    ]);
    let mut f = CsvFile::create(dir, "report.csv", &header)?;
    for b in &report.buyers {
        f.row(&[
            market.utilities[b.buyer].class.name().to_string(),
            (b.buyer + 1).to_string(),
            num(b.u_hat),
            num(b.u_star),
            num(b.u_hat_avg),
            num(b.u_star_avg),
            num(report.distance_to_um),
            num(report.distance_to_mc),
            num(report.distance_to_um_avg),
            num(report.distance_to_mc_avg),
            num(report.walras_residual),
            num(report.bpb_spread),
            num(report.saving_residual),
            report.degenerate_steps.to_string(),
        ])?;
    }
    f.finish()
}

/// Budget grid over the fitted box, `points` per buyer, first buyer
/// varying slowest.
fn budget_grid(n: usize, points: usize, (lo, hi): (f64, f64)) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = if points == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..points)
            .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
            .collect()
    };
    let mut grid = vec![Vec::new()];
    for _ in 0..n {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&b| {
                    let mut next = prefix.clone();
                    next.push(b);
                    next
                })
            })
            .collect();
    }
    grid
}

fn verify(cfg: &RunConfig, fit: &FittedViResult) -> Result<Vec<String>, CliError> {
    let market = cfg.market.as_ref().expect("resolved config");
    let gda = cfg.gda.as_ref().expect("resolved config");
    let spec = cfg.verify.as_ref().expect("resolved config");
    if spec.grid_points == 0 {
        return Err(CliError::Config("verify.grid_points must be >= 1".into()));
    }
    let box_ = cfg.fit.as_ref().expect("resolved config").budget_box;
    let states: Vec<MarketState> = budget_grid(market.n_buyers(), spec.grid_points, box_)
        .into_iter()
        .map(|b| market.state(b))
        .collect();
    let recce = RecceConfig {
        utility_floor: gda.utility_floor,
        ..RecceConfig::default()
    };
    let policy = |s: &MarketState| {
        nested_gda_fisher(
            market,
            s,
            &fit.v,
            gda,
            nearest_warm(&fit.archive, &s.budgets),
        )
        .map(|p| p.action())
    };
    let report = verify_recce(market, &fit.v, &policy, &states, &recce)?;

    let mut header = strings(["state"]);
    header.extend(indexed("budget", market.n_buyers()));
    header.extend(strings([
        "clearing_value",
        "excess_demand",
        "bpb_spread",
        "walras_residual",
        "saving_residual",
        "degenerate_buyers",
    ]));
    let mut f = CsvFile::create(&cfg.out, "verify.csv", &header)?;
    for (k, (s, r)) in states.iter().zip(&report.states).enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(s.budgets.iter().map(|&b| num(b)));
        row.extend([
            num(r.clearing_value),
            num(r.excess_demand),
            num(r.max_bpb_spread()),
            num(r.walras),
            num(r.max_saving()),
            r.degenerate_buyers.len().to_string(),
        ]);
        f.row(&row)?;
    }
    f.finish()?;
    Ok(vec![format!(
        "states={} max_excess_demand={} max_bpb_spread={} max_saving_residual={}",
        states.len(),
        num(report.max_excess_demand()),
        num(report.max_bpb_spread()),
        num(report.max_saving())
    )])
}
