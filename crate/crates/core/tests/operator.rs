use proptest::prelude::*;
use rand::Rng;
use stackgame::oracles::minmax_table;
use stackgame::seed::stream;
use stackgame::{apply_operator, grid_minmax, q_from_v, toy, GridOracle, StateValueFunction};

/// Literal triple loop: min over outer points of the max over feasible
/// inner points, with no tie handling.
fn brute_minmax(f: &[Vec<f64>], mask: &[Vec<bool>]) -> Option<f64> {
    let mut best = f64::INFINITY;
    let mut any = false;
    for (row, feas) in f.iter().zip(mask) {
        let mut inner = f64::NEG_INFINITY;
        for (&v, &ok) in row.iter().zip(feas) {
            if ok && v > inner {
                inner = v;
            }
        }
        if inner > f64::NEG_INFINITY {
            any = true;
            best = best.min(inner);
        }
    }
    any.then_some(best)
}

fn table_minmax(f: &[Vec<f64>], mask: &[Vec<bool>]) -> Option<f64> {
    minmax_table(f.len(), f[0].len(), |i, j| f[i][j], |i, j| mask[i][j])
        .ok()
        .map(|(v, _, _)| v)
}

fn table_and_mask() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<Vec<bool>>)> {
    (1usize..6, 1usize..6).prop_flat_map(|(nx, ny)| {
        (
            prop::collection::vec(prop::collection::vec(-10.0..10.0_f64, ny), nx),
            prop::collection::vec(prop::collection::vec(any::<bool>(), ny), nx),
        )
    })
}

proptest! {
    #[test]
    fn minmax_table_matches_triple_loop((f, mask) in table_and_mask()) {
        prop_assert_eq!(table_minmax(&f, &mask), brute_minmax(&f, &mask));
    }

    #[test]
    fn minmax_is_nonexpansive((f, mask) in table_and_mask(), shift in prop::collection::vec(-1.0..1.0_f64, 36)) {
        let h: Vec<Vec<f64>> = f
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, v)| v + shift[(i * 6 + j) % 36]).collect())
            .collect();
        let gap = f.iter().flatten().zip(h.iter().flatten()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if let (Some(a), Some(b)) = (table_minmax(&f, &mask), table_minmax(&h, &mask)) {
            prop_assert!((a - b).abs() <= gap + 1e-12);
        }
    }

    #[test]
    fn operator_contracts_on_two_state_game(
        v in prop::collection::vec(-10.0..10.0_f64, 2),
        w in prop::collection::vec(-10.0..10.0_f64, 2),
    ) {
        let game = toy::two_state_game(0.9).unwrap();
        let oracle = GridOracle::default();
        let (v, w) = (StateValueFunction::Tabular(v), StateValueFunction::Tabular(w));
        let tv = apply_operator(&game, &v, &oracle).unwrap();
        let tw = apply_operator(&game, &w, &oracle).unwrap();
        prop_assert!(tv.sup_distance(&tw).unwrap() <= 0.9 * v.sup_distance(&w).unwrap() + 1e-9);
    }
}

#[test]
fn contraction_on_three_state_game() {
    let game = toy::three_state_game().unwrap();
    let oracle = GridOracle::default();
    let bound = game.value_bound();
    let mut rng = stream(7, "contraction", 0);
    let mut draw =
        || StateValueFunction::Tabular((0..3).map(|_| rng.random_range(-bound..bound)).collect());
    for _ in 0..100 {
        let (v, w) = (draw(), draw());
        let tv = apply_operator(&game, &v, &oracle).unwrap();
        let tw = apply_operator(&game, &w, &oracle).unwrap();
        assert!(
            tv.sup_distance(&tw).unwrap() <= game.discount() * v.sup_distance(&w).unwrap() + 1e-9
        );
    }
}

#[test]
fn operator_keeps_the_value_box() {
    let game = toy::three_state_game().unwrap();
    let oracle = GridOracle::default();
    let bound = game.value_bound();
    let mut rng = stream(7, "box", 0);
    for _ in 0..50 {
        let v =
            StateValueFunction::Tabular((0..3).map(|_| rng.random_range(-bound..=bound)).collect());
        let tv = apply_operator(&game, &v, &oracle).unwrap();
        assert!(tv
            .as_table()
            .unwrap()
            .iter()
            .all(|x| x.abs() <= bound + 1e-12));
    }
}

#[test]
fn backup_equals_grid_minmax_of_q() {
    let game = toy::two_state_game(0.9).unwrap();
    let v = StateValueFunction::Tabular(vec![1.5, -2.0]);
    let tv = apply_operator(&game, &v, &GridOracle::default()).unwrap();
    let pts = game.outer_space().discretize(5).unwrap();
    for s in 0..2 {
        let q = |x: &[f64], y: &[f64]| q_from_v(&game, &v, s, x, y).unwrap();
        let g = |x: &[f64], y: &[f64]| game.constraints(s, x, y);
        let direct = grid_minmax(&q, &g, &pts, &pts, 1e-8).unwrap();
        assert_eq!(tv.as_table().unwrap()[s], direct.value);
    }
}
