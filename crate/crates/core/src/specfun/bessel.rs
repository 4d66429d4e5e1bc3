//! Integer-order Bessel functions of the first kind.
//!
//! Small arguments use the ascending series. Everything else uses Miller's
//! downward recurrence normalised with `J_0 + 2 Σ J_{2k} = 1`, which is stable
//! for every order and keeps absolute error near machine epsilon.

use crate::{Error, Result};

pub const MAX_ORDER: i32 = 200;
pub const MAX_ARGUMENT: f64 = 100.0;

/// Below this argument the ascending series converges monotonically.
const SERIES_CUTOFF: f64 = 1.0;
const RESCALE_AT: f64 = 1e250;

/// `J_order(x)` for `|order| <= 200`, `|x| <= 100`.
pub fn bessel_j(order: i32, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > MAX_ARGUMENT {
        return Err(Error::domain(format!(
            "Bessel argument {x} outside [-{MAX_ARGUMENT}, {MAX_ARGUMENT}]"
        )));
    }
    if order.abs() > MAX_ORDER {
        return Err(Error::domain(format!(
            "Bessel order {order} outside [-{MAX_ORDER}, {MAX_ORDER}]"
        )));
    }
    Ok(bessel_j_unchecked(order, x))
}

/// As [`bessel_j`] without range checks; callers guarantee the domain.
pub fn bessel_j_unchecked(order: i32, x: f64) -> f64 {
    let n = order.unsigned_abs();
    // J_{-n}(x) = (-1)^n J_n(x) and J_n(-x) = (-1)^n J_n(x)
    let mut negate = false;
    if order < 0 && n % 2 == 1 {
        negate = !negate;
    }
    if x < 0.0 && n % 2 == 1 {
        negate = !negate;
    }
    let ax = x.abs();
    let v = if ax == 0.0 {
        if n == 0 {
            1.0
        } else {
            0.0
        }
    } else if ax < SERIES_CUTOFF {
        ascending_series(n, ax)
    } else {
        miller(n, ax)
    };
    if negate {
        -v
    } else {
        v
    }
}

fn ascending_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut prefactor = 1.0;
    for k in 1..=n {
        prefactor *= half / k as f64;
    }
    if prefactor == 0.0 {
        return 0.0;
    }
    let q = -half * half;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200u32 {
        term *= q / (k as f64 * (n + k) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    prefactor * sum
}

fn miller(n: u32, x: f64) -> f64 {
    let top = (n as f64).max(x);
    let mut start = (top + 30.0 + (60.0 * top).sqrt()).ceil() as u32;
    if start % 2 == 1 {
        start += 1;
    }
    let two_over_x = 2.0 / x;
    let mut j_next = 0.0; // J_{k+1}
    let mut j_cur = 1e-30; // J_k, arbitrary scale
    let mut norm = 0.0;
    let mut result = 0.0;
    let mut k = start;
    while k > 0 {
        let j_prev = k as f64 * two_over_x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        k -= 1;
        if k == n {
            result = j_cur;
        }
        if k.is_multiple_of(2) && k > 0 {
            norm += 2.0 * j_cur;
        }
        if j_cur.abs() > RESCALE_AT {
            j_cur /= RESCALE_AT;
            j_next /= RESCALE_AT;
            norm /= RESCALE_AT;
            result /= RESCALE_AT;
        }
    }
    norm += j_cur;
    result / norm
}
