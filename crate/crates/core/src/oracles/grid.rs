use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionSpace, MinMaxOracle, MinMaxPoint, StageConstraints, DEFAULT_FEAS_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracleConfig {
    /// Points per coordinate used to discretize box action spaces.
    pub resolution: usize,
    pub feas_tol: f64,
}

impl Default for GridOracleConfig {
    fn default() -> Self {
        Self {
            resolution: 5,
            feas_tol: DEFAULT_FEAS_TOL,
        }
    }
}

impl GridOracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::domain("resolution", "must be at least 2"));
        }
        if !(self.feas_tol >= 0.0) {
            return Err(Error::domain("feas_tol", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Exhaustive search over discretized action sets.
#[derive(Debug, Clone, Default)]
pub struct GridOracle {
    pub config: GridOracleConfig,
}

impl GridOracle {
    pub fn new(config: GridOracleConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl MinMaxOracle for GridOracle {
    fn minmax(
        &self,
        outer: &ActionSpace,
        inner: &ActionSpace,
        objective: &dyn Fn(&[f64], &[f64]) -> f64,
        constraints: &StageConstraints,
    ) -> Result<MinMaxPoint> {
        let xs = outer.discretize(self.config.resolution)?;
        let ys = inner.discretize(self.config.resolution)?;
        grid_minmax(objective, constraints, &xs, &ys, self.config.feas_tol)
    }

    fn feas_tol(&self) -> f64 {
        self.config.feas_tol
    }
}

/// Generalized min-max over a tabulated objective.
///
/// Returns `(value, i*, j*)` with `value = min_i max_{j feasible} value(i, j)`.
/// Ties are broken towards the lowest index, for the outer argmin and for the
/// inner argmax alike. Outer points without any feasible inner point count as
/// `+∞` and are skipped; if all of them are blocked the result is
/// [`Error::Infeasible`].
pub fn minmax_table(
    nx: usize,
    ny: usize,
    value: impl Fn(usize, usize) -> f64,
    feasible: impl Fn(usize, usize) -> bool,
) -> Result<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..nx {
        let mut inner_best: Option<(f64, usize)> = None;
        for j in 0..ny {
            if !feasible(i, j) {
                continue;
            }
            let v = value(i, j);
            if v.is_nan() {
                return Err(Error::NonFinite(format!(
                    "objective at grid pair ({i}, {j})"
                )));
            }
            if inner_best.is_none_or(|(b, _)| v > b) {
                inner_best = Some((v, j));
            }
        }
        if let Some((v, j)) = inner_best {
            if best.is_none_or(|(b, _, _)| v < b) {
                best = Some((v, i, j));
            }
        }
    }
    best.ok_or(Error::Infeasible)
}

/// Generalized min-max of `f` over explicit grids, with `g(x, y) >= -feas_tol`
/// as the feasibility test. See [`minmax_table`] for tie-breaking.
pub fn grid_minmax(
    f: &dyn Fn(&[f64], &[f64]) -> f64,
    g: &StageConstraints,
    x_grid: &[Vec<f64>],
    y_grid: &[Vec<f64>],
    feas_tol: f64,
) -> Result<MinMaxPoint> {
    if x_grid.is_empty() || y_grid.is_empty() {
        return Err(Error::domain("grid", "action grids must be nonempty"));
    }
    let (value, i, j) = minmax_table(
        x_grid.len(),
        y_grid.len(),
        |i, j| f(&x_grid[i], &y_grid[j]),
        |i, j| g(&x_grid[i], &y_grid[j]).iter().all(|&c| c >= -feas_tol),
    )?;
    Ok(MinMaxPoint {
        value,
        outer: x_grid[i].clone(),
        inner: y_grid[j].clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    fn no_constraints(_: &[f64], _: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    #[test]
    fn squared_distance() {
        let g = pts(&[0.0, 0.5, 1.0]);
        let p = grid_minmax(&|x, y| (x[0] - y[0]).powi(2), &no_constraints, &g, &g, 0.0).unwrap();
        assert_eq!((p.value, p.outer[0], p.inner[0]), (0.25, 0.5, 0.0));
    }

    #[test]
    fn constraint_pins_inner() {
        let g = pts(&[0.0, 0.5, 1.0]);
        let p = grid_minmax(&|_, y| y[0], &|x, y| vec![x[0] - y[0]], &g, &g, 0.0).unwrap();
        assert_eq!((p.value, p.outer[0], p.inner[0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bilinear_tie_break() {
        let g = pts(&[-1.0, 0.0, 1.0]);
        let p = grid_minmax(&|x, y| x[0] * y[0], &no_constraints, &g, &g, 0.0).unwrap();
        assert_eq!((p.value, p.outer[0], p.inner[0]), (0.0, 0.0, -1.0));
    }

    #[test]
    fn blocked_outer_points_are_skipped() {
        // x = 0 has no feasible y; x = 1 does.
        let (v, i, j) = minmax_table(2, 2, |i, j| (i + j) as f64, |i, _| i == 1).unwrap();
        assert_eq!((v, i, j), (2.0, 1, 1));
        assert_eq!(
            minmax_table(2, 2, |_, _| 0.0, |_, _| false),
            Err(Error::Infeasible)
        );
    }

    #[test]
    fn nan_objective_is_an_error() {
        assert!(matches!(
            minmax_table(1, 1, |_, _| f64::NAN, |_, _| true),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn rejects_empty_grids() {
        assert!(grid_minmax(&|_, _| 0.0, &no_constraints, &[], &pts(&[0.0]), 0.0).is_err());
    }
}
