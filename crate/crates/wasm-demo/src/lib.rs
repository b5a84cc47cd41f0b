//! Browser demo: ruin probability curves, the small-ambiguity expansion and
//! the cost of ignoring ambiguity, for the market `mu = 0.1`, `sigma = 0.15`,
//! `c = 1`, `b = 1` with adjustable `r`, `lambda` and `eps`.
//!
//! Every export returns one flat `Vec<f64>` holding equal-length columns
//! back to back, wealth first.

use robust_ruin::asymptotics::expansion;
use robust_ruin::closed_forms::{pi_nonrobust, psi_nonrobust, psi_worstcase};
use robust_ruin::policy_eval::{evaluate_fixed_policy, PolicyTable};
use robust_ruin::{make_grid, solve, ModelParams, SolverOptions, ValueSolution};
use wasm_bindgen::prelude::wasm_bindgen;

const MU: f64 = 0.1;
const SIGMA: f64 = 0.15;
const C: f64 = 1.0;
const B: f64 = 1.0;

fn robust(r: f64, lambda: f64, eps: f64, n: usize) -> Result<(ModelParams, ValueSolution), String> {
    let p = ModelParams::new(r, MU, SIGMA, C, B, lambda, eps).map_err(|e| e.to_string())?;
    let grid = make_grid(&p, n).map_err(|e| e.to_string())?;
    let sol = solve(&p, &grid, &SolverOptions::default()).map_err(|e| e.to_string())?;
    Ok((p, sol))
}

/// Columns `w, psi, psi_0, psi_inf, pi*, pi_0`.
pub fn ruin_curves(r: f64, lambda: f64, eps: f64, n: usize) -> Result<Vec<f64>, String> {
    let (p, sol) = robust(r, lambda, eps, n)?;
    let w = &sol.grid.nodes;
    let mut out = w.clone();
    out.extend(&sol.psi);
    out.extend(w.iter().map(|&x| psi_nonrobust(&p, x)));
    out.extend(w.iter().map(|&x| psi_worstcase(&p, x)));
    out.extend(&sol.pi_star);
    for &x in w {
        out.push(pi_nonrobust(&p, x).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// Columns `w, psi, f0 + eps f1`.
pub fn expansion_curves(r: f64, lambda: f64, eps: f64, n: usize) -> Result<Vec<f64>, String> {
    let (p, sol) = robust(r, lambda, eps, n)?;
    let mut out = sol.grid.nodes.clone();
    out.extend(&sol.psi);
    for &x in &sol.grid.nodes {
        out.push(expansion(&p, x, eps).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

/// Columns `w, psi, psi under the non-robust rule`.
pub fn policy_gap(r: f64, lambda: f64, eps: f64, n: usize) -> Result<Vec<f64>, String> {
    let (p, sol) = robust(r, lambda, eps, n)?;
    let rule = PolicyTable::from_fn(sol.grid.clone(), |w| pi_nonrobust(&p, w).unwrap_or(0.0));
    let naive = evaluate_fixed_policy(&p, &rule, &sol.grid, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let mut out = sol.grid.nodes.clone();
    out.extend(&sol.psi);
    out.extend(&naive.value);
    Ok(out)
}

#[wasm_bindgen(js_name = ruinCurves)]
pub fn ruin_curves_js(r: f64, lambda: f64, eps: f64, n: usize) -> Result<Vec<f64>, String> {
    ruin_curves(r, lambda, eps, n)
}

#[wasm_bindgen(js_name = expansionCurves)]
pub fn expansion_curves_js(r: f64, lambda: f64, eps: f64, n: usize) -> Result<Vec<f64>, String> {
    expansion_curves(r, lambda, eps, n)
}

#[wasm_bindgen(js_name = policyGap)]
pub fn policy_gap_js(r: f64, lambda: f64, eps: f64, n: usize) -> Result<Vec<f64>, String> {
    policy_gap(r, lambda, eps, n)
}
