//! Closed-form relevance-compression curves.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

use crate::prob::{binary_entropy, ProbError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub threshold: f64,
    pub rate: f64,
}

fn domain(name: &'static str, value: f64, lo: f64, hi: f64) -> ProbError {
    ProbError::Domain { name, value, lo, hi }
}

/// The `u` in `[0, 1/2]` with `binary_entropy(u) = h`, by bisection.
pub fn inverse_binary_entropy(h: f64) -> Result<f64, ProbError> {
    if !(0.0..=LN_2).contains(&h) {
        return Err(domain("h", h, 0.0, LN_2));
    }
    // the entropy is flat at its peak; bisection only resolves sqrt(eps) there
    if h == LN_2 {
        return Ok(0.5);
    }
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if binary_entropy(mid)? < h {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `R(I) = log 2 - H((u - e) / (1 - 2e))` with `I = log 2 - H(u)`.
pub fn bernoulli_r(i: f64, e: f64) -> Result<f64, ProbError> {
    if !(0.0..0.5).contains(&e) {
        return Err(domain("e", e, 0.0, 0.5));
    }
    let cap = LN_2 - binary_entropy(e)?;
    if !(0.0..=cap).contains(&i) {
        return Err(domain("I", i, 0.0, cap));
    }
    let u = inverse_binary_entropy((LN_2 - i).max(0.0))?;
    let arg = ((u - e) / (1.0 - 2.0 * e)).clamp(0.0, 0.5);
    Ok(LN_2 - binary_entropy(arg)?)
}

/// `R(I) = -1/2 log(((1 + snr) e^{-2I} - 1) / snr)` for `I < 1/2 log(1 + snr)`.
pub fn gaussian_r(i: f64, snr: f64) -> Result<f64, ProbError> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(domain("snr", snr, 0.0, f64::INFINITY));
    }
    let cap = 0.5 * snr.ln_1p();
    if !(i >= 0.0 && i < cap) {
        return Err(domain("I", i, 0.0, cap));
    }
    Ok(-0.5 * (((1.0 + snr) * (-2.0 * i).exp() - 1.0) / snr).ln())
}

/// The straight-line curve `R(I) = I` of the block-diagonal 4x4 joint.
pub fn constant_slope_r(i: f64) -> Result<f64, ProbError> {
    if !(0.0..=LN_2).contains(&i) {
        return Err(domain("I", i, 0.0, LN_2));
    }
    Ok(i)
}
