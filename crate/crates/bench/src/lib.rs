//! Shared fixtures for the solver benchmarks.

use rand::Rng;
use stackgame::seed::stream;
use stackgame::{preset_sized, FisherMarket, GdaConfig, StateValueFunction};

/// A dense `n x n` table with a random feasibility mask that keeps at least
/// one feasible inner point per outer point.
pub fn random_table(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<bool>>) {
    let mut rng = stream(seed, "bench-table", 0);
    let f = (0..n)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mask = (0..n)
        .map(|_| {
            let mut row: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            row[rng.random_range(0..n)] = true;
            row
        })
        .collect();
    (f, mask)
}

/// The big linear preset resized to `n` buyers and `m` goods, with a value
/// function slightly favouring money.
pub fn market(n: usize, m: usize) -> (FisherMarket, GdaConfig, StateValueFunction) {
    let p = preset_sized("paper-big-linear", n, m).expect("preset exists");
    let v = StateValueFunction::LinearInBudget {
        a: vec![0.5; n],
        c: 1.0,
    };
    (p.market, p.gda, v)
}
