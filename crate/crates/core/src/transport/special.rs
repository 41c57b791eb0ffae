//! Digamma and trigamma functions.

use std::f64::consts::PI;

use crate::error::{Error, Result};

// Shift threshold for the asymptotic expansions; truncation error there is
// below 1e-16 with the terms kept.
const ASYMPTOTIC_FROM: f64 = 10.0;

fn check(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("argument {x} is not finite")));
    }
    if x <= 0.0 && x == x.floor() {
        return Err(Error::Domain(format!("pole at {x}")));
    }
    Ok(())
}

/// π·cot(πx) with the argument reduced to (−½, ½] first.
fn pi_cot_pi(x: f64) -> f64 {
    let r = x - x.round();
    PI / (PI * r).tan()
}

/// (π / sin(πx))² with argument reduction.
fn pi_csc_pi_sq(x: f64) -> f64 {
    let r = x - x.round();
    let s = PI / (PI * r).sin();
    s * s
}

/// ψ(x) = Γ'(x)/Γ(x).
///
/// Negative arguments use the reflection ψ(x) = ψ(1 − x) − π cot(πx);
/// positive ones are shifted to x ≥ 10 with ψ(x) = ψ(x + 1) − 1/x and
/// finished with the asymptotic series.
pub fn digamma(x: f64) -> Result<f64> {
    check(x)?;
    if x < 0.0 {
        return Ok(digamma_positive(1.0 - x) - pi_cot_pi(x));
    }
    Ok(digamma_positive(x))
}

fn digamma_positive(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    let series = z
        * (1.0 / 12.0
            - z * (1.0 / 120.0
                - z * (1.0 / 252.0 - z * (1.0 / 240.0 - z * (1.0 / 132.0 - z * (691.0 / 32760.0 - z / 12.0))))));
    acc + x.ln() - 0.5 / x - series
}

/// ψ'(x), the trigamma function.
pub fn trigamma(x: f64) -> Result<f64> {
    check(x)?;
    if x < 0.0 {
        // ψ'(1 − x) + ψ'(x) = π² / sin²(πx)
        return Ok(pi_csc_pi_sq(x) - trigamma_positive(1.0 - x));
    }
    Ok(trigamma_positive(x))
}

fn trigamma_positive(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    let series = 1.0 / 6.0
        - z * (1.0 / 30.0
            - z * (1.0 / 42.0 - z * (1.0 / 30.0 - z * (5.0 / 66.0 - z * (691.0 / 2730.0 - z * 7.0 / 6.0)))));
    acc + 1.0 / x + 0.5 * z + z / x * series
}
