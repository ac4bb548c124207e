use proptest::prelude::*;
use stackgame::{
    greedy_policy, grid_minmax, iterations_needed, q_from_v, toy, value_iteration, ActionSpace,
    GridOracle, StateValueFunction, StochasticGame, ViConfig,
};

fn run(game: &StochasticGame, max_iters: usize, record: bool) -> stackgame::ViResult {
    let cfg = ViConfig {
        max_iters,
        sup_norm_tol: 0.0,
        record_trajectory: record,
    };
    value_iteration(
        game,
        &GridOracle::default(),
        &StateValueFunction::zeros(game.n_states()),
        &cfg,
    )
    .unwrap()
}

#[test]
fn iterates_respect_the_convergence_bound() {
    let game = toy::two_state_game(0.9).unwrap();
    let star = run(&game, 1000, false).v_final;
    let traj = run(&game, 200, true);
    for (k, v) in traj.iterates.iter().enumerate() {
        let gap = v.sup_distance(&star).unwrap();
        assert!(gap <= 0.9_f64.powi(k as i32) / 0.1 + 1e-9, "k={k}: {gap}");
    }
    let k = iterations_needed(0.01, 0.9, 1.0).unwrap() as usize;
    assert_eq!(k, 70);
    assert!(traj.iterates[k].sup_distance(&star).unwrap() <= 0.01);
}

#[test]
fn deltas_shrink_geometrically_and_values_stay_boxed() {
    for game in [
        toy::two_state_game(0.9).unwrap(),
        toy::three_state_game().unwrap(),
    ] {
        let out = run(&game, 150, false);
        for w in out.deltas.windows(2) {
            assert!(w[1] <= game.discount() * w[0] + 1e-9);
        }
        let bound = game.value_bound();
        assert!(out
            .v_final
            .as_table()
            .unwrap()
            .iter()
            .all(|v| v.abs() <= bound));
    }
}

#[test]
fn stops_at_the_tolerance() {
    let game = toy::two_state_game(0.9).unwrap();
    let cfg = ViConfig {
        sup_norm_tol: 1e-6,
        ..ViConfig::default()
    };
    let out = value_iteration(
        &game,
        &GridOracle::default(),
        &StateValueFunction::zeros(2),
        &cfg,
    )
    .unwrap();
    assert!(out.converged);
    assert!(*out.deltas.last().unwrap() < 1e-6);
    assert!(out.deltas[..out.deltas.len() - 1]
        .iter()
        .all(|&d| d >= 1e-6));
}

#[test]
fn zero_discount_gives_stage_minmax() {
    let game = toy::two_state_game(0.0).unwrap();
    let out = run(&game, 3, false);
    let pts = game.outer_space().discretize(5).unwrap();
    for s in 0..2 {
        let r = |x: &[f64], y: &[f64]| game.reward(s, x, y);
        let g = |x: &[f64], y: &[f64]| game.constraints(s, x, y);
        let direct = grid_minmax(&r, &g, &pts, &pts, 1e-8).unwrap().value;
        assert_eq!(out.v_final.as_table().unwrap()[s], direct);
    }
}

#[test]
fn single_state_limit_is_geometric() {
    let gamma = 0.75;
    let game = StochasticGame::builder(1)
        .discount(gamma)
        .reward_bound(1.0)
        .outer_space(ActionSpace::unit_box(1))
        .inner_space(ActionSpace::unit_box(1))
        .reward(|_, x, y| (x[0] - y[0]).powi(2))
        .transition(|_, _, _| vec![1.0])
        .build()
        .unwrap();
    // Stage value on the 5-point grid: x = 0.5 guarantees 0.25.
    let out = run(&game, 400, false);
    assert!((out.v_final.as_table().unwrap()[0] - 0.25 / (1.0 - gamma)).abs() < 1e-9);
}

/// Checks the per-state Stackelberg sandwich at the VI fixed point by
/// enumerating every grid pair.
#[test]
fn fixed_point_greedy_profile_is_stackelberg() {
    let tol = 1e-6;
    for game in [
        toy::two_state_game(0.9).unwrap(),
        toy::three_state_game().unwrap(),
    ] {
        let oracle = GridOracle::default();
        let v = run(&game, 1000, false).v_final;
        let policy = greedy_policy(&game, &v, &oracle).unwrap();
        let xs = game.outer_space().discretize(5).unwrap();
        let ys = game.inner_space().discretize(5).unwrap();
        for s in 0..game.n_states() {
            let q = |x: &[f64], y: &[f64]| q_from_v(&game, &v, s, x, y).unwrap();
            let feasible =
                |x: &[f64], y: &[f64]| game.constraints(s, x, y).iter().all(|&c| c >= -1e-8);
            let (xs_star, ys_star) = (&policy.outer[s], &policy.inner[s]);
            let q_star = q(xs_star, ys_star);
            assert!(feasible(xs_star, ys_star));
            assert!((q_star - v.as_table().unwrap()[s]).abs() <= tol);
            for y in ys.iter().filter(|y| feasible(xs_star, y)) {
                assert!(
                    q(xs_star, y) <= q_star + tol,
                    "follower deviation at state {s}"
                );
            }
            for x in &xs {
                let best = ys
                    .iter()
                    .filter(|y| feasible(x, y))
                    .map(|y| q(x, y))
                    .fold(f64::NEG_INFINITY, f64::max);
                assert!(q_star <= best + tol, "leader deviation at state {s}");
            }
        }
    }
}

proptest! {
    #[test]
    fn bound_is_monotone(eps in 1e-4..10.0_f64, gamma in 0.01..0.99_f64, rbar in 0.01..100.0_f64, bump in 1.0..3.0_f64) {
        let k = iterations_needed(eps, gamma, rbar).unwrap();
        prop_assert!(iterations_needed(eps * bump, gamma, rbar).unwrap() <= k);
        prop_assert!(iterations_needed(eps, gamma, rbar * bump).unwrap() >= k);
        let g2 = gamma + (1.0 - gamma) * (1.0 - 1.0 / bump);
        prop_assert!(iterations_needed(eps, g2, rbar).unwrap() >= k);
    }
}
