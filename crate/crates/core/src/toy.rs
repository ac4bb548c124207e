//! Small bundled games for tests, examples and the CLI.

use crate::error::Result;
use crate::game::{ActionSpace, StochasticGame};

/// Two states, scalar actions in `[0, 1]` (discretized to 5 points by the
/// default grid oracle), `|r| <= 1`.
///
/// ```text
/// r(s, x, y) = (x - y)²/2 + (y - x)/4 + c_s,   c = (0.1, -0.2)
/// g(s, x, y) = x + (1 + s)/4 - y
/// P(s | s, x, y) = 0.3 + x(1 - y)/2 + y/10
/// ```
pub fn two_state_game(discount: f64) -> Result<StochasticGame> {
    const OFFSET: [f64; 2] = [0.1, -0.2];
    StochasticGame::builder(2)
        .discount(discount)
        .reward_bound(1.0)
        .outer_space(ActionSpace::unit_box(1))
        .inner_space(ActionSpace::unit_box(1))
        .reward(|s, x, y| 0.5 * (x[0] - y[0]).powi(2) + 0.25 * (y[0] - x[0]) + OFFSET[s])
        .constraints(|s, x, y| vec![x[0] + 0.25 * (1.0 + s as f64) - y[0]])
        .transition(|s, x, y| {
            let stay = 0.3 + 0.5 * x[0] * (1.0 - y[0]) + 0.1 * y[0];
            if s == 0 {
                vec![stay, 1.0 - stay]
            } else {
                vec![1.0 - stay, stay]
            }
        })
        .build()
}

/// Three states with explicit 5-point action grids, discount 0.8 and a
/// coupling constraint `y <= x + 1/2` in state 1.
pub fn three_state_game() -> Result<StochasticGame> {
    let grid = || ActionSpace::grid((0..5).map(|k| vec![k as f64 / 4.0]).collect());
    StochasticGame::builder(3)
        .discount(0.8)
        .reward_bound(1.0)
        .outer_space(grid()?)
        .inner_space(grid()?)
        .reward(|s, x, y| {
            let sf = s as f64;
            0.7 * (1.0 + sf + 3.0 * x[0] - 2.0 * (sf + 1.0) * y[0]).cos()
                + 0.3 * (x[0] * y[0] - 0.5 * sf * y[0])
        })
        .constraints(|s, x, y| {
            if s == 1 {
                vec![x[0] + 0.5 - y[0]]
            } else {
                vec![1.0]
            }
        })
        .transition(|s, x, y| {
            let w: Vec<f64> = (0..3)
                .map(|k| {
                    let kf = k as f64;
                    1.0 + kf * x[0] + (2.0 - kf) * y[0] + if k == s { 0.5 } else { 0.0 }
                })
                .collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        })
        .build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::DEFAULT_FEAS_TOL;

    #[test]
    fn toy_games_validate_on_their_grids() {
        let g = two_state_game(0.9).unwrap();
        let pts = g.outer_space().discretize(5).unwrap();
        g.validate_on(&pts, &pts, DEFAULT_FEAS_TOL).unwrap();

        let h = three_state_game().unwrap();
        let pts = h.outer_space().discretize(5).unwrap();
        assert_eq!(pts.len(), 5);
        h.validate_on(&pts, &pts, DEFAULT_FEAS_TOL).unwrap();
    }
}
