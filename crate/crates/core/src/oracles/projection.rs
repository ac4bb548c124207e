//! Euclidean projection onto `{z >= 0, w·z <= b}` with `w >= 0`.
//!
//! The KKT conditions give `z*_j = max(z_j - λ w_j, 0)` for a single
//! multiplier `λ >= 0`, and `λ ↦ w·z*(λ)` is continuous and nonincreasing,
//! so `λ` is located by bisection and then solved exactly on the final
//! active set.

const BISECTION_STEPS: usize = 200;

/// Projects `z` onto `{y >= 0, weights·y <= budget}`.
///
/// Coordinates with zero weight are only clipped at zero. A nonpositive
/// budget projects every weighted coordinate to zero.
pub fn project_halfspace_orthant(z: &[f64], weights: &[f64], budget: f64) -> Vec<f64> {
    debug_assert_eq!(z.len(), weights.len());
    let budget = budget.max(0.0);
    let clipped: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
    let spend = |y: &[f64]| y.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
    if spend(&clipped) <= budget {
        return clipped;
    }

    let shifted = |lambda: f64| -> Vec<f64> {
        z.iter()
            .zip(weights)
            .map(|(&v, &w)| (v - lambda * w).max(0.0))
            .collect()
    };
    let mut lo = 0.0_f64;
    let mut hi = z
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| v / w)
        .fold(0.0_f64, f64::max);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let shifted_spend: f64 = z
            .iter()
            .zip(weights)
            .map(|(&v, &w)| w * (v - mid * w).max(0.0))
            .sum();
        if shifted_spend > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Exact multiplier on the active set at the bracket's upper end.
    let active: Vec<usize> = (0..z.len())
        .filter(|&j| weights[j] > 0.0 && z[j] - hi * weights[j] > 0.0)
        .collect();
    let mut lambda = hi;
    if !active.is_empty() {
        let ww: f64 = active.iter().map(|&j| weights[j] * weights[j]).sum();
        let wz: f64 = active.iter().map(|&j| weights[j] * z[j]).sum();
        let exact = (wz - budget) / ww;
        if exact >= lo && exact <= hi {
            lambda = exact;
        }
    }
    let mut y = shifted(lambda);
    // Rounding can leave the spend a few ulps above the budget.
    let s = spend(&y);
    if s > budget && s > 0.0 {
        let scale = budget / s;
        for (v, &w) in y.iter_mut().zip(weights) {
            if w > 0.0 {
                *v *= scale;
            }
        }
    }
    y
}

/// Per-buyer projection of allocations and savings onto the budget sets
/// `{(x_i, s_i) >= 0 : p·x_i + s_i <= b_i}`.
pub fn project_budget_set(
    alloc: &[Vec<f64>],
    savings: &[f64],
    prices: &[f64],
    budgets: &[f64],
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut weights = prices.to_vec();
    weights.push(1.0);
    let mut z = Vec::with_capacity(prices.len() + 1);
    alloc
        .iter()
        .zip(savings)
        .zip(budgets)
        .map(|((x, &s), &b)| {
            z.clear();
            z.extend_from_slice(x);
            z.push(s);
            let mut y = project_halfspace_orthant(&z, &weights, b);
            let s = y.pop().unwrap_or(0.0);
            (y, s)
        })
        .unzip()
}
