//! Exact value functions and policies for the limiting regimes: a trusted
//! model (`eps = 0`), total distrust (`eps = inf`) and immortality
//! (`lambda = 0`).
//!
//! All value functions clamp to 1 below the ruin level and to 0 at or above
//! the safe level; at the ruin level the derivatives are one-sided.

use crate::error::ParamError;
use crate::model::{derive, ModelParams};

/// Beyond this ambiguity level `e^eps` is evaluated through a log-sum-exp rewrite.
const LSE_SWITCH: f64 = 700.0;

/// Value, first and second wealth derivative at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

fn scale(p: &ModelParams) -> f64 {
    p.rate / (p.consumption - p.rate * p.ruin_level)
}

/// Ruin probability when the reference model is trusted.
pub fn psi_nonrobust(p: &ModelParams, w: f64) -> f64 {
    power_jet(p, w, derive(p).exponent).value
}

pub fn psi_nonrobust_jet(p: &ModelParams, w: f64) -> Jet {
    power_jet(p, w, derive(p).exponent)
}

/// `x^k` with `x` the normalised gap to the safe level, plus wealth derivatives.
fn power_jet(p: &ModelParams, w: f64, k: f64) -> Jet {
    if w < p.ruin_level {
        return Jet { value: 1.0, d1: 0.0, d2: 0.0 };
    }
    if w >= p.safe_level() {
        return Jet { value: 0.0, d1: 0.0, d2: 0.0 };
    }
    let x = p.gap_ratio(w);
    let s = scale(p);
    let v = x.powf(k);
    Jet { value: v, d1: -k * s * v / x, d2: k * (k - 1.0) * s * s * v / (x * x) }
}

/// Optimal investment for a retiree who trusts the model.
pub fn pi_nonrobust(p: &ModelParams, w: f64) -> Result<f64, ParamError> {
    if p.hazard <= 0.0 {
        return Err(ParamError::HazardZero);
    }
    let d = derive(p).exponent;
    let gap = (p.consumption - p.rate * w.clamp(p.ruin_level, p.safe_level())).max(0.0);
    Ok(p.merton_ratio() * gap / ((d - 1.0) * p.rate))
}

/// Ruin probability when the adversary controls the drift completely and
/// the retiree therefore holds no risky asset.
pub fn psi_worstcase(p: &ModelParams, w: f64) -> f64 {
    power_jet(p, w, p.hazard / p.rate).value
}

/// Exponent of the immortal non-robust ruin probability.
pub fn perpetual_exponent(p: &ModelParams) -> f64 {
    derive(p).half_sharpe_sq / p.rate + 1.0
}

/// Robust probability of ever being ruined when the retiree never dies.
pub fn psi_perpetual(p: &ModelParams, w: f64) -> f64 {
    psi_perpetual_jet(p, w).value
}

pub fn psi_perpetual_jet(p: &ModelParams, w: f64) -> Jet {
    let eps = p.ambiguity;
    let y = power_jet(p, w, perpetual_exponent(p));
    if w < p.ruin_level || w >= p.safe_level() {
        return y;
    }
    let value = if eps > LSE_SWITCH {
        (eps + (y.value + (1.0 - y.value) * (-eps).exp()).ln()) / eps
    } else {
        (eps.exp_m1() * y.value).ln_1p() / eps
    };
    // e1 / (1 + e1 y) written so it stays finite for huge eps
    let g = 1.0 / (1.0 / eps.exp_m1() + y.value);
    let d1 = g * y.d1 / eps;
    let d2 = (g * y.d2 - (g * y.d1).powi(2)) / eps;
    Jet { value, d1, d2 }
}

/// Optimal investment of the immortal robust problem; it does not depend on `eps`.
pub fn pi_perpetual(p: &ModelParams, w: f64) -> f64 {
    let gap = (p.consumption - p.rate * w.clamp(p.ruin_level, p.safe_level())).max(0.0);
    2.0 * gap / (p.drift - p.rate)
}

/// Optimal drift distortion of the immortal robust problem.
pub fn theta_perpetual(p: &ModelParams, w: f64) -> f64 {
    let y = power_jet(p, w, perpetual_exponent(p)).value;
    -theta_perpetual_limit(p) * y / (1.0 / p.ambiguity.exp_m1() + y)
}

/// Magnitude of the distortion as `eps -> inf`: `2 sigma (R + r) / (mu - r)`.
pub fn theta_perpetual_limit(p: &ModelParams) -> f64 {
    let k = derive(p);
    2.0 * p.volatility * (k.half_sharpe_sq + p.rate) / (p.drift - p.rate)
}
