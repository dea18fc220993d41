use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// `f(y) = Σ_m c_m y^{m-2} - 1` for a map from tensor order `m >= 2` to a
/// nonnegative coefficient.
pub fn root_polynomial(coeffs: &BTreeMap<usize, f64>, y: f64) -> f64 {
    coeffs
        .iter()
        .map(|(&m, &c)| c * y.powi(m as i32 - 2))
        .sum::<f64>()
        - 1.0
}

fn root_derivative(coeffs: &BTreeMap<usize, f64>, y: f64) -> f64 {
    coeffs
        .iter()
        .filter(|(&m, _)| m > 2)
        .map(|(&m, &c)| (m - 2) as f64 * c * y.powi(m as i32 - 3))
        .sum()
}

/// The unique `y > 0` with `Σ_m c_m y^{m-2} = 1`.
///
/// Requires `c_2 < 1` (absent means 0) and all coefficients nonnegative, so
/// `f(0) < 0` and `f` is increasing on `(0, ∞)`. When every `c_m` with
/// `m >= 3` is zero there is no finite root and `+∞` is returned.
///
/// The bracket `[0, hi]` is grown geometrically from `hi = 1`, narrowed by
/// bisection to a relative width of `1e-9`, then polished with at most ten
/// Newton steps.
pub fn positive_root(coeffs: &BTreeMap<usize, f64>) -> Result<f64> {
    for (&m, &c) in coeffs {
        if m < 2 {
            return Err(Error::InvalidInput(format!("coefficient order {m} is below 2")));
        }
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "coefficient for order {m} must be finite and nonnegative, got {c}"
            )));
        }
    }
    let c2 = coeffs.get(&2).copied().unwrap_or(0.0);
    if c2 >= 1.0 {
        return Err(Error::ConditionViolated(format!(
            "linear coefficient {c2} must be below 1"
        )));
    }
    if coeffs.iter().all(|(&m, &c)| m == 2 || c == 0.0) {
        return Ok(f64::INFINITY);
    }

    let f = |y: f64| root_polynomial(coeffs, y);
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::InvalidInput("coefficients too small to bracket a root".into()));
        }
    }
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut y = 0.5 * (lo + hi);
    for _ in 0..10 {
        let fy = f(y);
        if fy == 0.0 {
            return Ok(y);
        }
        if fy < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let next = y - fy / root_derivative(coeffs, y);
        if !(next > lo && next < hi) {
            break;
        }
        if next == y {
            break;
        }
        y = next;
    }
    if f(y).abs() >= 1e-12 {
        // Newton left the bracket or stalled; finish by bisection.
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        y = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    }
    Ok(y)
}
