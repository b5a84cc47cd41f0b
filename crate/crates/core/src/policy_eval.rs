//! Robust value of a fixed investment rule: the adversary still picks the
//! worst drift distortion, but the retiree no longer re-optimises.
//!
//! With `pi` frozen the value `u` solves the semilinear equation
//!
//! ```text
//! lambda u = (r w - c + (mu - r) pi) u' + sigma^2 pi^2 / 2 (u'' + eps u'^2),   u(b) = 1,  u(w_s) = 0.
//! ```
//!
//! Working with `exp(eps u)` turns the quadratic gradient term into a linear
//! operator; the scheme uses central differences where they keep the
//! operator monotone and second-order upwind differences elsewhere.

use crate::banded::BandMatrix;
use crate::closed_forms::pi_nonrobust;
use crate::error::{ParamError, SolveError};
use crate::hjb_solver::{solve, SolverOptions};
use crate::model::{make_grid, Grid, ModelParams};

const MIN_CONTINUATION_EPS: f64 = 1e-4;
const MIN_DAMPING: f64 = 1e-10;
const STAGNATION: f64 = 1e3 * f64::EPSILON;
/// Allowed excursion of the value outside `[0, 1]`.
const RANGE_SLACK: f64 = 1e-6;

/// Investment rule sampled on a grid, read by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub grid: Grid,
    pub pi: Vec<f64>,
}

impl PolicyTable {
    pub fn new(grid: Grid, pi: Vec<f64>) -> Result<Self, ParamError> {
        if pi.len() != grid.len() || pi.iter().any(|v| !v.is_finite()) || *pi.last().unwrap() != 0.0 {
            return Err(ParamError::PolicyMismatch);
        }
        Ok(PolicyTable { grid, pi })
    }

    /// Tabulate a rule on the grid, forcing zero investment at the safe level.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let n = grid.len();
        let pi = grid.nodes.iter().enumerate().map(|(i, &w)| if i + 1 == n { 0.0 } else { f(w) }).collect();
        PolicyTable { grid, pi }
    }

    /// Piecewise-linear value; zero outside the grid.
    pub fn value_at(&self, w: f64) -> f64 {
        let nodes = &self.grid.nodes;
        if !(w >= nodes[0] && w <= nodes[nodes.len() - 1]) {
            return 0.0;
        }
        let i = self.grid.locate(w);
        let s = (w - nodes[i]) / self.grid.spacing;
        self.pi[i] + s.min(1.0) * (self.pi[i + 1] - self.pi[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValue {
    pub grid: Grid,
    pub value: Vec<f64>,
    pub residual_sup: f64,
    pub iterations: usize,
}

/// Coefficients of `sum_k c_k (v_{i+k} - v_i)` at one interior node, offsets -2..=2.
struct FixedScheme {
    eps: f64,
    hazard: f64,
    coef: Vec<[f64; 5]>,
}

impl FixedScheme {
    fn new(p: &ModelParams, grid: &Grid, pi: &[f64]) -> FixedScheme {
        let n = grid.len();
        let m = n - 2;
        let h = grid.spacing;
        let mut coef = Vec::with_capacity(m);
        for j in 0..m {
            let i = j + 1;
            let w = grid.nodes[i];
            let diff = 0.5 * p.volatility * p.volatility * pi[i] * pi[i];
            let adv = p.rate * w - p.consumption + (p.drift - p.rate) * pi[i];
            let mut c = [0.0; 5];
            c[1] += diff / (h * h);
            c[3] += diff / (h * h);
            if diff / (h * h) >= adv.abs() / (2.0 * h) {
                c[3] += 0.5 * adv / h;
                c[1] -= 0.5 * adv / h;
            } else if adv > 0.0 {
                if j + 1 < m {
                    c[3] += 2.0 * adv / h;
                    c[4] -= 0.5 * adv / h;
                } else {
                    c[3] += adv / h;
                }
            } else if j > 0 {
                c[1] -= 2.0 * adv / h;
                c[0] += 0.5 * adv / h;
            } else {
                c[1] -= adv / h;
            }
            coef.push(c);
        }
        FixedScheme { eps: p.ambiguity, hazard: p.hazard, coef }
    }

    fn e1(&self, diff: f64) -> f64 {
        (self.eps * diff).exp_m1() / self.eps
    }

    /// Residual and its relative size at each interior node.
    fn residual(&self, u: &[f64], out: &mut [f64]) -> f64 {
        let mut rel = 0.0f64;
        for (j, c) in self.coef.iter().enumerate() {
            let i = j + 1;
            let mut acc = 0.0;
            let mut scale = self.hazard * u[i].abs();
            for (k, &ck) in c.iter().enumerate() {
                if ck != 0.0 {
                    let t = ck * self.e1(u[i + k - 2] - u[i]);
                    acc += t;
                    scale += t.abs();
                }
            }
            out[j] = self.hazard * u[i] - acc;
            rel = rel.max(out[j].abs() / scale.max(f64::MIN_POSITIVE));
        }
        rel
    }

    fn jacobian(&self, u: &[f64]) -> BandMatrix {
        let m = self.coef.len();
        let mut jac = BandMatrix::new(m, 2, 2);
        for (j, c) in self.coef.iter().enumerate() {
            let i = j + 1;
            let mut diag = self.hazard;
            for (k, &ck) in c.iter().enumerate() {
                if ck != 0.0 {
                    let e = ck * (self.eps * (u[i + k - 2] - u[i])).exp();
                    diag += e;
                    let col = j as isize + k as isize - 2;
                    if col >= 0 && (col as usize) < m {
                        jac.set(j, col as usize, -e);
                    }
                }
            }
            jac.set(j, j, diag);
        }
        jac
    }
}

fn newton(s: &FixedScheme, u: &mut Vec<f64>, opts: &SolverOptions, count: &mut usize) -> Result<(), f64> {
    let m = s.coef.len();
    let mut f = vec![0.0; m];
    let mut ft = vec![0.0; m];
    let mut trial = u.clone();
    s.residual(u, &mut f);
    let mut last = f64::INFINITY;
    for _ in 0..opts.max_iter {
        *count += 1;
        let jac = s.jacobian(u);
        let mut du: Vec<f64> = f.iter().map(|v| -v).collect();
        jac.solve(&mut du).map_err(|_| f64::NAN)?;
        let norm = du.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !norm.is_finite() {
            return Err(norm);
        }
        let mut t = 1.0;
        let rel = loop {
            for j in 0..m {
                trial[j + 1] = u[j + 1] + t * du[j];
            }
            let rel = s.residual(&trial, &mut ft);
            if ft.iter().all(|v| v.is_finite()) {
                if norm <= opts.tol {
                    break rel;
                }
                let mut probe: Vec<f64> = ft.iter().map(|v| -v).collect();
                if jac.solve(&mut probe).is_ok() && probe.iter().fold(0.0f64, |a, v| a.max(v.abs())) <= (1.0 - t / 4.0) * norm {
                    break rel;
                }
            }
            t *= 0.5;
            if t < MIN_DAMPING {
                return Err(norm);
            }
        };
        std::mem::swap(u, &mut trial);
        std::mem::swap(&mut f, &mut ft);
        last = rel;
        if t == 1.0 && norm <= opts.tol && (norm <= STAGNATION || rel <= opts.tol) {
            return Ok(());
        }
    }
    Err(last)
}

/// Robust ruin probability of following `policy` on `grid`.
pub fn evaluate_fixed_policy(
    p: &ModelParams,
    policy: &PolicyTable,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<PolicyValue, SolveError> {
    p.check_solver_range()?;
    let reference = make_grid(p, grid.len())?;
    if reference != *grid {
        return Err(ParamError::GridMismatch.into());
    }
    let pi: Vec<f64> = if policy.grid == *grid {
        policy.pi.clone()
    } else {
        grid.nodes.iter().map(|&w| policy.value_at(w)).collect()
    };
    let mut iterations = 0;
    let value = stage(p, grid, &pi, opts, &mut iterations)?;
    let n = grid.len();
    let worst = value.iter().fold(0.0f64, |a, &v| a.max(-v).max(v - 1.0));
    if worst > RANGE_SLACK {
        return Err(SolveError::OutOfRange(worst));
    }
    let scheme = FixedScheme::new(p, grid, &pi);
    let mut res = vec![0.0; n - 2];
    scheme.residual(&value, &mut res);
    let residual_sup = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(PolicyValue { grid: grid.clone(), value, residual_sup, iterations })
}

fn stage(p: &ModelParams, grid: &Grid, pi: &[f64], opts: &SolverOptions, count: &mut usize) -> Result<Vec<f64>, SolveError> {
    let scheme = FixedScheme::new(p, grid, pi);
    let n = grid.len();
    let top = (n - 1) as f64;
    // the zero-investment value is a reasonable shape for any admissible rule
    let shape = p.hazard / p.rate;
    let mut u: Vec<f64> = (0..n).map(|i| ((n - 1 - i) as f64 / top).powf(shape)).collect();
    match newton(&scheme, &mut u, opts, count) {
        Ok(()) => return Ok(u),
        Err(last) if p.ambiguity < MIN_CONTINUATION_EPS => {
            return Err(SolveError::NonConvergence { iterations: *count, last_step: last })
        }
        Err(_) => {}
    }
    let half = ModelParams { ambiguity: 0.5 * p.ambiguity, ..*p };
    let mut u = stage(&half, grid, pi, opts, count)?;
    newton(&scheme, &mut u, opts, count).map_err(|last| SolveError::NonConvergence { iterations: *count, last_step: last })?;
    Ok(u)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationCell {
    pub rate: f64,
    pub ambiguity: f64,
    /// Largest excess ruin probability of the non-robust rule, rounded to 3 decimals.
    pub max_deviation: f64,
    /// Unrounded value.
    pub raw: f64,
}

/// Excess robust ruin probability caused by following the non-robust rule,
/// maximised over interior nodes.
pub fn max_deviation(p: &ModelParams, grid_n: usize, opts: &SolverOptions) -> Result<f64, SolveError> {
    if p.ambiguity <= 0.0 {
        return Err(ParamError::DeviationAmbiguity.into());
    }
    let grid = make_grid(p, grid_n)?;
    let best = solve(p, &grid, opts)?;
    let policy = PolicyTable::from_fn(grid.clone(), |w| pi_nonrobust(p, w).unwrap_or(0.0));
    let fixed = evaluate_fixed_policy(p, &policy, &grid, opts)?;
    Ok((1..grid_n - 1).map(|i| fixed.value[i] - best.psi[i]).fold(f64::NEG_INFINITY, f64::max))
}

/// One cell per `(r, eps)` pair, rows ordered by rate then ambiguity.
pub fn deviation_table(
    base: &ModelParams,
    rates: &[f64],
    ambiguities: &[f64],
    grid_n: usize,
    opts: &SolverOptions,
) -> Vec<Result<DeviationCell, SolveError>> {
    if ambiguities.iter().any(|&e| e <= 0.0) {
        return vec![Err(ParamError::DeviationAmbiguity.into())];
    }
    let mut out = Vec::with_capacity(rates.len() * ambiguities.len());
    for &rate in rates {
        for &ambiguity in ambiguities {
            let cell = base
                .with_rate(rate)
                .and_then(|p| p.with_ambiguity(ambiguity))
                .map_err(SolveError::from)
                .and_then(|p| max_deviation(&p, grid_n, opts))
                .map(|raw| DeviationCell { rate, ambiguity, max_deviation: (raw * 1e3).round() / 1e3, raw });
            out.push(cell);
        }
    }
    out
}
