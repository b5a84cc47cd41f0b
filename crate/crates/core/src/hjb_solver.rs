//! Finite-difference solver for the robust ruin-probability boundary value
//! problem
//!
//! ```text
//! lambda psi = -R psi'^2 / (eps psi'^2 + psi'') + (r w - c) psi',   psi(b) = 1,  psi(w_s) = 0,
//! ```
//!
//! and extraction of the optimal investment `pi*` and drift distortion `theta*`.
//!
//! The unknown is handled through `v = exp(eps psi)`, which is convex and
//! decreasing. Derivatives of `v` are taken with three-point Lagrange stencils
//! in the mapped coordinate `z = ((c - r w)/(c - r b))^d`, the non-robust
//! ruin probability. The map concentrates resolution where the solution
//! decays like a power of `c - r w` near the safe level, and is exact for the
//! immortal problem where `v` is affine in `z`. Newton's method runs on
//! `ln psi` so that tail values stay positive.

use crate::banded::BandMatrix;
use crate::error::{ParamError, SolveError};
use crate::model::{derive, DerivedConstants, Grid, ModelParams};

/// Ambiguity level below which continuation gives up.
const MIN_CONTINUATION_EPS: f64 = 1e-4;
/// Smallest damping factor tried in a Newton step.
const MIN_DAMPING: f64 = 1e-10;
/// Newton corrections in `ln psi` below this are rounding noise.
const STAGNATION: f64 = 1e3 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual and step tolerance.
    pub tol: f64,
    /// Newton iteration budget per continuation stage.
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iter: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub grid: Grid,
    /// Minimum robust probability of lifetime ruin at each node.
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
    /// Second derivative; `NaN` at the two boundary nodes.
    pub d2psi: Vec<f64>,
    /// `eps psi'^2 + psi''`, computed directly from `v''/(eps v)`; `NaN` at the boundary nodes.
    pub curvature: Vec<f64>,
    pub pi_star: Vec<f64>,
    pub theta_star: Vec<f64>,
    /// Largest absolute residual of the original equation over interior nodes.
    pub residual_sup: f64,
    pub iterations: usize,
}

/// Stencil weights at interior nodes, normalised by the local value of `z`.
struct Scheme {
    n: usize,
    eps: f64,
    hazard: f64,
    big_r: f64,
    /// `r w - c` at interior nodes.
    drift: Vec<f64>,
    d1lo: Vec<f64>,
    d1up: Vec<f64>,
    d2lo: Vec<f64>,
    d2up: Vec<f64>,
    zw: Vec<f64>,
    zww: Vec<f64>,
    /// Derivative weights at the ruin level, on nodes 1 and 2.
    edge: (f64, f64),
    /// Exclude the last interior node from residual norms.
    skip_last: bool,
}

impl Scheme {
    fn new(p: &ModelParams, k: &DerivedConstants, grid: &Grid) -> Scheme {
        let n = grid.len();
        let d = k.exponent;
        let r = p.rate;
        let xb = p.consumption - r * p.ruin_level;
        let top = (n - 1) as f64;
        let m = n - 2;
        let mut s = Scheme {
            n,
            eps: p.ambiguity,
            hazard: p.hazard,
            big_r: k.half_sharpe_sq,
            drift: Vec::with_capacity(m),
            d1lo: Vec::with_capacity(m),
            d1up: Vec::with_capacity(m),
            d2lo: Vec::with_capacity(m),
            d2up: Vec::with_capacity(m),
            zw: Vec::with_capacity(m),
            zww: Vec::with_capacity(m),
            edge: (0.0, 0.0),
            skip_last: d < 2.0,
        };
        for i in 1..n - 1 {
            let steps = (n - 1 - i) as f64;
            let x = xb * steps / top;
            // (z_i - z_{i-1}) / z_i and (z_{i+1} - z_i) / z_i
            let hm = -(d * (1.0 / steps).ln_1p()).exp_m1();
            let hp = (d * (-1.0 / steps).ln_1p()).exp_m1();
            let hs = hm + hp;
            s.d1lo.push(-hp / (hm * hs));
            s.d1up.push(hm / (hp * hs));
            s.d2lo.push(2.0 / (hm * hs));
            s.d2up.push(2.0 / (hp * hs));
            s.zw.push(-d * r / x);
            s.zww.push(d * (d - 1.0) * r * r / (x * x));
            s.drift.push(r * grid.nodes[i] - p.consumption);
        }
        let z1 = ((top - 1.0) / top).powf(d);
        let z2 = ((top - 2.0) / top).powf(d);
        s.edge = ((1.0 - z2) / ((z1 - 1.0) * (z1 - z2)), (1.0 - z1) / ((z2 - 1.0) * (z2 - z1)));
        s
    }

    fn interior(&self) -> usize {
        self.n - 2
    }

    fn e1(&self, diff: f64) -> f64 {
        (self.eps * diff).exp_m1() / self.eps
    }

    /// `v'/(eps v)` and `v''/(eps v)` at interior node `j + 1`.
    fn derivs(&self, psi: &[f64], j: usize) -> (f64, f64) {
        let i = j + 1;
        let a = self.e1(psi[i + 1] - psi[i]);
        let b = self.e1(psi[i - 1] - psi[i]);
        let p1 = self.d1lo[j] * b + self.d1up[j] * a;
        let q1 = self.d2lo[j] * b + self.d2up[j] * a;
        (p1 * self.zw[j], q1 * self.zw[j] * self.zw[j] + p1 * self.zww[j])
    }

    /// Residual of the scheme at every interior node, or `None` if monotonicity
    /// (`p < 0`) or convexity (`q > 0`) fails somewhere.
    fn residual(&self, psi: &[f64], out: &mut [f64]) -> Result<(), Failure> {
        for j in 0..self.interior() {
            let (p, q) = self.derivs(psi, j);
            if !(p < 0.0) {
                return Err(Failure::Monotonicity);
            }
            if !(q > 0.0) {
                return Err(Failure::Convexity);
            }
            let g = self.big_r * p - self.drift[j] * q + self.hazard * psi[j + 1] * q / p;
            if !g.is_finite() {
                return Err(Failure::Monotonicity);
            }
            out[j] = g;
        }
        Ok(())
    }

    /// Jacobian with respect to `ln psi` at interior nodes.
    fn jacobian(&self, psi: &[f64]) -> BandMatrix {
        let m = self.interior();
        let mut jac = BandMatrix::new(m, 1, 1);
        for j in 0..m {
            let i = j + 1;
            let (p, q) = self.derivs(psi, j);
            let ea = (self.eps * (psi[i + 1] - psi[i])).exp();
            let eb = (self.eps * (psi[i - 1] - psi[i])).exp();
            let (zw, zww) = (self.zw[j], self.zww[j]);
            let pa = self.d1up[j] * zw;
            let pb = self.d1lo[j] * zw;
            let qa = self.d2up[j] * zw * zw + self.d1up[j] * zww;
            let qb = self.d2lo[j] * zw * zw + self.d1lo[j] * zww;
            let lp = self.hazard * psi[i];
            let gp = self.big_r - lp * q / (p * p);
            let gq = -self.drift[j] + lp / p;
            let up = (gp * pa + gq * qa) * ea;
            let lo = (gp * pb + gq * qb) * eb;
            jac.set(j, j, (-up - lo + self.hazard * q / p) * psi[i]);
            if j + 1 < m {
                jac.set(j, j + 1, up * psi[i + 1]);
            }
            if j > 0 {
                jac.set(j, j - 1, lo * psi[i - 1]);
            }
        }
        jac
    }

    /// Largest relative residual of the division form and largest absolute residual.
    fn residual_norms(&self, psi: &[f64]) -> (f64, f64) {
        let mut rel = 0.0f64;
        let mut abs = 0.0f64;
        let count = if self.skip_last { self.interior() - 1 } else { self.interior() };
        for j in 0..count {
            let (p, q) = self.derivs(psi, j);
            let lp = self.hazard * psi[j + 1];
            let res = lp + self.big_r * p * p / q - self.drift[j] * p;
            abs = abs.max(res.abs());
            rel = rel.max(res.abs() / (lp + (self.drift[j] * p).abs()));
        }
        (rel, abs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Failure {
    Monotonicity,
    Convexity,
    Budget(f64),
}

/// Damped Newton on `y = ln psi`. A step of length `t` is accepted when the
/// trial point keeps the discrete `v` decreasing and convex and the next
/// simplified Newton correction shrinks by at least `1 - t/4`.
fn newton(s: &Scheme, psi: &mut Vec<f64>, opts: &SolverOptions, count: &mut usize) -> Result<(), Failure> {
    let m = s.interior();
    let mut g = vec![0.0; m];
    s.residual(psi, &mut g)?;
    let mut trial = psi.clone();
    let mut gt = vec![0.0; m];
    for _ in 0..opts.max_iter {
        *count += 1;
        let jac = s.jacobian(psi);
        let mut dy: Vec<f64> = g.iter().map(|v| -v).collect();
        jac.solve(&mut dy).map_err(|_| Failure::Convexity)?;
        let norm = dy.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !norm.is_finite() {
            return Err(Failure::Monotonicity);
        }
        let mut t = 1.0;
        let mut last = Failure::Budget(norm);
        loop {
            for j in 0..m {
                trial[j + 1] = psi[j + 1] * (t * dy[j]).exp();
            }
            match s.residual(&trial, &mut gt) {
                Ok(()) => {
                    if norm <= opts.tol {
                        break;
                    }
                    let mut probe: Vec<f64> = gt.iter().map(|v| -v).collect();
                    if jac.solve(&mut probe).is_ok() {
                        let next = probe.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                        if next <= (1.0 - t / 4.0) * norm {
                            break;
                        }
                    }
                }
                Err(f) => last = f,
            }
            t *= 0.5;
            if t < MIN_DAMPING {
                return Err(last);
            }
        }
        std::mem::swap(psi, &mut trial);
        std::mem::swap(&mut g, &mut gt);
        // the relative residual has a rounding floor near 1e-9 for large eps;
        // a Newton correction at rounding level means nothing more can be gained
        if t == 1.0 && norm <= opts.tol && (norm <= STAGNATION || s.residual_norms(psi).0 <= opts.tol) {
            return Ok(());
        }
    }
    Err(Failure::Budget(s.residual_norms(psi).0))
}

fn check_grid(p: &ModelParams, grid: &Grid) -> Result<(), ParamError> {
    let n = grid.len();
    if n < crate::model::MIN_GRID_NODES {
        return Err(ParamError::GridTooSmall(n));
    }
    let ws = p.safe_level();
    let span = ws - p.ruin_level;
    let h = span / (n - 1) as f64;
    let ok = grid.nodes[0] == p.ruin_level
        && grid.nodes[n - 1] == ws
        && (grid.spacing - h).abs() <= 1e-12 * h
        && grid
            .nodes
            .iter()
            .enumerate()
            .all(|(i, w)| (w - (p.ruin_level + h * i as f64)).abs() <= 1e-9 * span);
    if ok {
        Ok(())
    } else {
        Err(ParamError::GridMismatch)
    }
}

/// Solve the robust boundary value problem on `grid`.
///
/// When Newton fails from the non-robust initial guess, the problem is first
/// solved at half the ambiguity level and the result is used as a warm start.
pub fn solve(p: &ModelParams, grid: &Grid, opts: &SolverOptions) -> Result<ValueSolution, SolveError> {
    p.check_solver_range()?;
    check_grid(p, grid)?;
    let k = derive(p);
    let mut iterations = 0;
    let psi = solve_stage(p, &k, grid, opts, &mut iterations)?;
    Ok(assemble(p, &k, grid, psi, iterations))
}

fn solve_stage(
    p: &ModelParams,
    k: &DerivedConstants,
    grid: &Grid,
    opts: &SolverOptions,
    iterations: &mut usize,
) -> Result<Vec<f64>, SolveError> {
    let scheme = Scheme::new(p, k, grid);
    let n = grid.len();
    let top = (n - 1) as f64;
    let mut psi: Vec<f64> = (0..n).map(|i| ((n - 1 - i) as f64 / top).powf(k.exponent)).collect();
    match newton(&scheme, &mut psi, opts, iterations) {
        Ok(()) => return Ok(psi),
        Err(f) if p.ambiguity < MIN_CONTINUATION_EPS => return Err(to_error(f, *iterations)),
        Err(_) => {}
    }
    let half = ModelParams { ambiguity: 0.5 * p.ambiguity, ..*p };
    let mut psi = solve_stage(&half, k, grid, opts, iterations)?;
    newton(&scheme, &mut psi, opts, iterations).map_err(|f| to_error(f, *iterations))?;
    Ok(psi)
}

fn to_error(f: Failure, iterations: usize) -> SolveError {
    match f {
        Failure::Convexity => SolveError::ConvexityLoss,
        Failure::Monotonicity => SolveError::NonConvergence { iterations, last_step: f64::NAN },
        Failure::Budget(step) => SolveError::NonConvergence { iterations, last_step: step },
    }
}

fn assemble(p: &ModelParams, k: &DerivedConstants, grid: &Grid, psi: Vec<f64>, iterations: usize) -> ValueSolution {
    let scheme = Scheme::new(p, k, grid);
    let n = grid.len();
    let eps = p.ambiguity;
    let mut dpsi = vec![0.0; n];
    let mut d2psi = vec![f64::NAN; n];
    let mut curvature = vec![f64::NAN; n];
    for j in 0..n - 2 {
        let (dp, q) = scheme.derivs(&psi, j);
        dpsi[j + 1] = dp;
        curvature[j + 1] = q;
        d2psi[j + 1] = q - eps * dp * dp;
    }
    let xb = p.consumption - p.rate * p.ruin_level;
    let zw0 = -k.exponent * p.rate / xb;
    dpsi[0] = (scheme.edge.0 * scheme.e1(psi[1] - psi[0]) + scheme.edge.1 * scheme.e1(psi[2] - psi[0])) * zw0;
    let (_, residual_sup) = scheme.residual_norms(&psi);
    let mut sol = ValueSolution {
        grid: grid.clone(),
        psi,
        dpsi,
        d2psi,
        curvature,
        pi_star: vec![0.0; n],
        theta_star: vec![0.0; n],
        residual_sup,
        iterations,
    };
    // curvature is positive at every interior node once Newton has accepted the iterate
    let (pi, theta) = extract_policy(&sol, p).expect("converged iterate has positive curvature");
    sol.pi_star = pi;
    sol.theta_star = theta;
    sol
}

/// Optimal investment and drift distortion at every node.
///
/// At the safe level both vanish; at the ruin level they are extrapolated
/// quadratically from the first interior nodes.
pub fn extract_policy(sol: &ValueSolution, p: &ModelParams) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let n = sol.psi.len();
    let k = p.merton_ratio();
    let mut pi = vec![0.0; n];
    for i in 1..n - 1 {
        let mut den = p.ambiguity * sol.dpsi[i] * sol.dpsi[i] + sol.d2psi[i];
        if sol.curvature[i].is_finite() {
            den = sol.curvature[i];
        }
        if !(den > 0.0) {
            return Err(SolveError::DegenerateDenominator(i));
        }
        pi[i] = -k * sol.dpsi[i] / den;
    }
    pi[0] = 3.0 * pi[1] - 3.0 * pi[2] + pi[3];
    pi[n - 1] = 0.0;
    let mut theta: Vec<f64> = (0..n).map(|i| p.volatility * p.ambiguity * sol.dpsi[i] * pi[i]).collect();
    theta[n - 1] = 0.0;
    Ok((pi, theta))
}

/// `((r w - c) psi' - lambda psi)(eps psi'^2 + psi'') - R psi'^2`.
pub fn residual(p: &ModelParams, w: f64, psi: f64, dpsi: f64, d2psi: f64) -> f64 {
    let big_r = derive(p).half_sharpe_sq;
    ((p.rate * w - p.consumption) * dpsi - p.hazard * psi) * (p.ambiguity * dpsi * dpsi + d2psi) - big_r * dpsi * dpsi
}

/// Wealth at which the ruin probability turns from concave to convex, if any.
///
/// Located where `(r w - c) psi' - lambda psi` falls through `R/eps`, which is
/// also where `psi''` and the distorted Sharpe ratio change sign.
pub fn inflection_point(sol: &ValueSolution, p: &ModelParams) -> Result<Option<f64>, SolveError> {
    let k = derive(p);
    let n = sol.psi.len();
    let sign_changes = (1..n - 2).filter(|&i| (sol.d2psi[i] < 0.0) != (sol.d2psi[i + 1] < 0.0)).count();
    if sign_changes > 1 {
        return Err(SolveError::InconsistentConcavity(sign_changes));
    }
    if p.rate <= p.hazard || p.ambiguity <= k.convex_threshold {
        return Ok(None);
    }
    let level = k.half_sharpe_sq / p.ambiguity;
    let w = &sol.grid.nodes;
    let f = |i: usize| (p.rate * w[i] - p.consumption) * sol.dpsi[i] - p.hazard * sol.psi[i];
    let cross = (1..n - 2).find(|&i| f(i) >= level && f(i + 1) < level);
    let Some(i) = cross else {
        return Ok(None);
    };
    let (fa, fb) = (f(i), f(i + 1));
    let w0 = w[i] + (w[i + 1] - w[i]) * (fa - level) / (fa - fb);
    let near = (i.saturating_sub(2)..(i + 3).min(n - 2))
        .any(|j| j >= 1 && sol.d2psi[j] < 0.0 && sol.d2psi[j + 1] >= 0.0);
    if sign_changes != 1 || !near {
        return Err(SolveError::InconsistentConcavity(sign_changes));
    }
    Ok(Some(w0))
}

/// One-sided second-order slope of `pi*` at the safe level.
pub fn boundary_slope(sol: &ValueSolution) -> f64 {
    let n = sol.pi_star.len();
    let h = sol.grid.spacing;
    (3.0 * sol.pi_star[n - 1] - 4.0 * sol.pi_star[n - 2] + sol.pi_star[n - 3]) / (2.0 * h)
}
