//! First-order expansion of the robust ruin probability in small ambiguity,
//! `psi ~ f0 + eps f1`, where `f0` is the non-robust probability and
//!
//! ```text
//! f1(w) = coeff (f0(w) - f0(w)^2),   coeff = R d^2 / ((d - 1)^2 (2 d r - lambda) + 2 R d).
//! ```

use crate::closed_forms::{psi_nonrobust_jet, Jet};
use crate::error::ParamError;
use crate::model::{derive, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionCoefficients {
    pub coeff: f64,
    pub exponent: f64,
    pub half_sharpe_sq: f64,
}

impl ExpansionCoefficients {
    pub fn new(p: &ModelParams) -> Result<Self, ParamError> {
        let k = derive(p);
        let d = k.exponent;
        let den = (d - 1.0).powi(2) * (2.0 * d * p.rate - p.hazard) + 2.0 * k.half_sharpe_sq * d;
        if !(den > 0.0) {
            return Err(ParamError::ExpansionDenominator);
        }
        Ok(ExpansionCoefficients { coeff: k.half_sharpe_sq * d * d / den, exponent: d, half_sharpe_sq: k.half_sharpe_sq })
    }
}

pub fn f0(p: &ModelParams, w: f64) -> f64 {
    crate::closed_forms::psi_nonrobust(p, w)
}

pub fn f1(p: &ModelParams, w: f64) -> Result<f64, ParamError> {
    Ok(f1_jet(p, w)?.value)
}

pub fn f1_jet(p: &ModelParams, w: f64) -> Result<Jet, ParamError> {
    let co = ExpansionCoefficients::new(p)?.coeff;
    let z = psi_nonrobust_jet(p, w);
    Ok(Jet {
        value: co * (z.value - z.value * z.value),
        d1: co * (1.0 - 2.0 * z.value) * z.d1,
        d2: co * ((1.0 - 2.0 * z.value) * z.d2 - 2.0 * z.d1 * z.d1),
    })
}

/// Coefficients `(A, B, C)` of the linear equation `f1'' + A f1' + B f1 + C = 0`.
pub fn f1_ode_coefficients(p: &ModelParams, w: f64) -> (f64, f64, f64) {
    let k = derive(p);
    let (d, big_r, r) = (k.exponent, k.half_sharpe_sq, p.rate);
    let x = p.consumption - r * w;
    let xb = p.consumption - r * p.ruin_level;
    let a = r * (d - 1.0) * (2.0 * big_r - r * d + r) / big_r / x;
    let b = -p.hazard * r * r * (d - 1.0).powi(2) / big_r / (x * x);
    let c = r * r * d * d * (x / xb).powf(2.0 * d) / (x * x);
    (a, b, c)
}

/// Residual of the linear equation for `f1` evaluated on the closed form.
pub fn f1_ode_residual(p: &ModelParams, w: f64) -> Result<f64, ParamError> {
    let j = f1_jet(p, w)?;
    let (a, b, c) = f1_ode_coefficients(p, w);
    Ok(j.d2 + a * j.d1 + b * j.value + c)
}

/// Residual of the first-order balance obtained by inserting `f0 + eps f1`
/// into the equation and collecting terms linear in `eps`.
pub fn first_order_residual(p: &ModelParams, w: f64) -> Result<f64, ParamError> {
    let big_r = derive(p).half_sharpe_sq;
    let z = psi_nonrobust_jet(p, w);
    let j = f1_jet(p, w)?;
    let drift = p.rate * w - p.consumption;
    Ok((drift * j.d1 - p.hazard * j.value) * z.d2 + (drift * z.d1 - p.hazard * z.value) * (z.d1 * z.d1 + j.d2)
        - 2.0 * big_r * z.d1 * j.d1)
}

/// Relative residual of `k = d` in `k^2 - (2d - 1 - r (d-1)^2 / R) k - lambda (d-1)^2 / R = 0`,
/// the indicial equation of the homogeneous part.
pub fn indicial_root_residual(p: &ModelParams) -> f64 {
    let k = derive(p);
    let (d, big_r) = (k.exponent, k.half_sharpe_sq);
    let lin = 2.0 * d - 1.0 - p.rate * (d - 1.0).powi(2) / big_r;
    let cst = p.hazard * (d - 1.0).powi(2) / big_r;
    (d * d - lin * d - cst).abs() / (d * d + (lin * d).abs() + cst)
}

/// `f0 + eps f1` without clamping.
pub fn expansion_raw(p: &ModelParams, w: f64, eps: f64) -> Result<f64, ParamError> {
    Ok(f0(p, w) + eps * f1(p, w)?)
}

/// `f0 + eps f1`, clamped to `[0, 1]`.
pub fn expansion(p: &ModelParams, w: f64, eps: f64) -> Result<f64, ParamError> {
    Ok(expansion_raw(p, w, eps)?.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(r: f64) -> ModelParams {
        ModelParams::new(r, 0.1, 0.15, 1.0, 1.0, 0.04, 0.1).unwrap()
    }

    #[test]
    fn coefficient_by_hand() {
        let p = base(0.02);
        let k = derive(&p);
        let (d, big_r) = (k.exponent, k.half_sharpe_sq);
        let expect = big_r * d * d / ((d - 1.0) * (d - 1.0) * (2.0 * d * 0.02 - 0.04) + 2.0 * big_r * d);
        let co = ExpansionCoefficients::new(&p).unwrap().coeff;
        assert!((co - expect).abs() < 1e-15);
        assert!((co - 0.449).abs() < 1e-3);
    }

    #[test]
    fn f1_matches_cauchy_euler_solution() {
        // g(x) = C1 x^d + Cp x^{2d} with Cp from substituting x^{2d}, C1 = -Cp xb^d
        let p = base(0.06);
        let k = derive(&p);
        let (d, big_r) = (k.exponent, k.half_sharpe_sq);
        let xb: f64 = 1.0 - 0.06;
        let cp = -big_r * d * d / (xb.powf(2.0 * d) * ((d - 1.0).powi(2) * (2.0 * d * 0.06 - 0.04) + 2.0 * big_r * d));
        let c1 = -cp * xb.powf(d);
        for w in [2.0, 8.0, 12.0, 16.0] {
            let x: f64 = 1.0 - 0.06 * w;
            let g = c1 * x.powf(d) + cp * x.powf(2.0 * d);
            assert!((f1(&p, w).unwrap() - g).abs() < 1e-13);
        }
    }

    #[test]
    fn boundary_values() {
        let p = base(0.02);
        assert_eq!(f1(&p, 1.0).unwrap(), 0.0);
        assert_eq!(f1(&p, 50.0).unwrap(), 0.0);
        assert_eq!(expansion(&p, 1.0, 3.0).unwrap(), 1.0);
        assert_eq!(expansion(&p, 50.0, 3.0).unwrap(), 0.0);
        assert_eq!(expansion(&p, 20.0, 0.0).unwrap(), f0(&p, 20.0));
    }
}
