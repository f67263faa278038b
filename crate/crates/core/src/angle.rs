//! Phase wrapping and modular comparison helpers.

use std::f64::consts::{PI, TAU};

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_tau(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let r = wrap_tau(x);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Distance from `x` to the nearest point of `target + k·period`.
pub fn modular_distance(x: f64, target: f64, period: f64) -> f64 {
    let r = (x - target).rem_euclid(period);
    r.min(period - r).abs()
}

/// True when `x ≡ target (mod period)` within `tol`.
pub fn congruent(x: f64, target: f64, period: f64, tol: f64) -> bool {
    modular_distance(x, target, period) <= tol
}
