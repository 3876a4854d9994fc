//! Principal branch of the Lambert W function.
//!
//! `W0` inverts `w * exp(w)` on `w >= -1`. The evaluator starts from a
//! piecewise approximation (branch-point series, Winitzki's global
//! approximation, or the large-argument asymptotic) and refines with
//! Halley's method.

use std::f64::consts::E;

use crate::error::{PceError, Result};

/// `-1/e`, the branch point of `W0`.
pub const BRANCH_POINT: f64 = -1.0 / E;

/// Absolute slack accepted below the branch point before raising a domain error.
pub const DOMAIN_SLACK: f64 = 1e-12;

const MAX_ITERATIONS: usize = 50;

/// Arguments above this are evaluated through the logarithmic form to avoid
/// overflow of `w * exp(w)`.
const LOG_FORM_THRESHOLD: f64 = 1e100;

/// Principal branch `W0(y)`.
///
/// Returns `w >= -1` with `w * exp(w) = y`. Arguments in
/// `[-1/e - 1e-12, -1/e]` are clamped to the branch point.
pub fn lambert_w0(y: f64) -> Result<f64> {
    if y.is_nan() || y < BRANCH_POINT - DOMAIN_SLACK {
        return Err(PceError::Domain {
            function: "lambert_w0",
            value: y,
        });
    }
    if y <= BRANCH_POINT {
        return Ok(-1.0);
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if y > LOG_FORM_THRESHOLD {
        return Ok(lambert_w0_exp(y.ln()));
    }
    Ok(halley(y, initial_guess(y)))
}

fn initial_guess(y: f64) -> f64 {
    if y < -0.25 {
        // series about the branch point in p = sqrt(2(e y + 1))
        let p = (2.0 * (E * y + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if y < 3.0 {
        let l = y.ln_1p();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    } else {
        let l1 = y.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

fn halley(y: f64, mut w: f64) -> f64 {
    for _ in 0..MAX_ITERATIONS {
        let ew = w.exp();
        let f = w * ew - y;
        let wp1 = w + 1.0;
        if wp1 <= 0.0 {
            return -1.0;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        let step = f / denom;
        let next = (w - step).max(-1.0);
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    w
}

/// `W0(exp(s))` evaluated without forming `exp(s)` when it would overflow.
///
/// For `s > 20` this solves `w + ln w = s` by Newton's method, which is the
/// logarithm of the defining equation.
pub fn lambert_w0_exp(s: f64) -> f64 {
    if s.is_nan() {
        return f64::NAN;
    }
    if s == f64::INFINITY {
        return f64::INFINITY;
    }
    if s <= 20.0 {
        let y = s.exp();
        if y == 0.0 {
            return 0.0;
        }
        return halley(y, initial_guess(y));
    }
    let mut w = s - s.ln() + s.ln() / s;
    for _ in 0..MAX_ITERATIONS {
        let f = w + w.ln() - s;
        let step = f * w / (w + 1.0);
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * w {
            break;
        }
    }
    w
}

/// `ln W0(exp(s))`, using `ln W = s - W` so that tiny values keep full
/// relative precision.
pub fn ln_lambert_w0_exp(s: f64) -> f64 {
    s - lambert_w0_exp(s)
}
