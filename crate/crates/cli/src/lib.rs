//! Command-line front end: argument definitions, subcommand drivers and CSV output.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use robust_ruin::asymptotics::expansion;
use robust_ruin::closed_forms::{
    pi_nonrobust, pi_perpetual, psi_nonrobust_jet, psi_perpetual_jet, psi_worstcase, theta_perpetual,
};
use robust_ruin::montecarlo::{estimate_objective, Estimate, SimConfig};
use robust_ruin::policy_eval::{deviation_table, PolicyTable};
use robust_ruin::{make_grid, solve, Grid, ModelParams, ParamError, SolveError, SolverOptions};

#[derive(Debug, Parser)]
#[command(name = "robust-ruin", version, about = "Minimum probability of lifetime ruin under drift ambiguity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the robust ruin probability and optimal feedback policies on a grid.
    Solve(SolveArgs),
    /// Excess robust ruin probability of the non-robust investment rule.
    Table1(Table1Args),
    /// Compare numerical solutions with the first-order expansion in eps.
    ExpandCheck(ExpandArgs),
    /// Check the solver against Monte Carlo simulation under the optimal controls.
    McVerify(McArgs),
}

/// Model parameters other than `r` and `eps`.
#[derive(Debug, Clone, Copy, Args)]
pub struct Market {
    /// Drift of the risky asset.
    #[arg(long)]
    pub mu: f64,
    /// Volatility of the risky asset.
    #[arg(long)]
    pub sigma: f64,
    /// Consumption rate.
    #[arg(long)]
    pub c: f64,
    /// Ruin level.
    #[arg(long)]
    pub b: f64,
    /// Hazard rate of death.
    #[arg(long)]
    pub lambda: f64,
}

impl Market {
    pub fn params(&self, r: f64, eps: f64) -> Result<ModelParams, ParamError> {
        ModelParams::new(r, self.mu, self.sigma, self.c, self.b, self.lambda, eps)
    }
}

#[derive(Debug, Clone, Copy, Args)]
pub struct Numerics {
    #[arg(long, default_value_t = 4001)]
    pub grid_n: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

impl Numerics {
    fn options(&self) -> SolverOptions {
        SolverOptions { tol: self.tol, ..SolverOptions::default() }
    }
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct SolveArgs {
    /// Riskless interest rate
    #[arg(long)]
    pub r: f64,
    #[command(flatten)]
    pub market: Market,
    /// Ambiguity aversion; `0` and `inf` select the closed forms.
    #[arg(long)]
    pub eps: f64,
    #[command(flatten)]
    pub numerics: Numerics,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct Table1Args {
    #[command(flatten)]
    pub market: Market,
    /// Interest rates, one table row each
    #[arg(long, value_delimiter = ',', default_value = "0.02,0.06")]
    pub r_list: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,10,20")]
    pub eps_list: Vec<f64>,
    #[command(flatten)]
    pub numerics: Numerics,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct ExpandArgs {
    /// Riskless interest rate
    #[arg(long)]
    pub r: f64,
    #[command(flatten)]
    pub market: Market,
    #[arg(long, value_delimiter = ',', required = true)]
    pub eps_list: Vec<f64>,
    #[command(flatten)]
    pub numerics: Numerics,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true)]
pub struct McArgs {
    /// Riskless interest rate
    #[arg(long)]
    pub r: f64,
    #[command(flatten)]
    pub market: Market,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub w0_list: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub dt: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 400.0)]
    pub t_max: f64,
    /// Multiplier applied to the optimal drift distortion; values other than 1
    /// check the one-sided bound `mean <= psi + 3 SE`.
    #[arg(long, default_value_t = 1.0)]
    pub theta_scale: f64,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub numerics: Numerics,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid parameters: {0}")]
    Param(ParamError),
    #[error("solver failed: {0}")]
    Solve(SolveError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{failed} of {total} starting points outside the 3 SE band")]
    Band { failed: usize, total: usize },
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Param(e)
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Param(p) => CliError::Param(p),
            e => CliError::Solve(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Param(_) | CliError::Usage(_) => 2,
            CliError::Solve(_) => 3,
            CliError::Band { .. } => 4,
            CliError::Io { .. } => 1,
        }
    }
}

/// Decimal text with 17 significant digits, independent of locale.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text with a header line and `\n` line endings.
pub fn csv(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(num).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    text
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Ruin probability and feedback policies at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub params: ModelParams,
    pub grid: Grid,
    pub psi: Vec<f64>,
    pub dpsi: Vec<f64>,
    pub pi_star: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub residual_sup: f64,
    pub iterations: usize,
}

impl Profile {
    /// Ruin probability at `w`, interpolated linearly between nodes.
    pub fn psi_at(&self, w: f64) -> f64 {
        let g = &self.grid;
        if w <= g.nodes[0] {
            return 1.0;
        }
        if w >= g.nodes[g.last()] {
            return 0.0;
        }
        let i = g.locate(w);
        let f = (w - g.nodes[i]) / g.spacing;
        self.psi[i] + f * (self.psi[i + 1] - self.psi[i])
    }

    pub fn csv(&self) -> String {
        let sharpe = self.params.sharpe();
        let rows = (0..self.grid.len()).map(|i| {
            vec![self.grid.nodes[i], self.psi[i], self.dpsi[i], self.pi_star[i], self.theta_star[i], sharpe + self.theta_star[i]]
        });
        csv("w,psi,dpsi,pi_star,theta_star,sharpe_distorted", rows)
    }
}

/// Numerical solution for `0 < eps` and `lambda > 0`, closed forms otherwise.
///
/// `eps = inf` gives the no-investment value with both policies zero.
pub fn profile(r: f64, market: &Market, eps: f64, numerics: &Numerics) -> Result<Profile, CliError> {
    if eps.is_nan() {
        return Err(ParamError::NotFinite("eps").into());
    }
    let finite_eps = if eps == f64::INFINITY { 0.0 } else { eps };
    let p = market.params(r, finite_eps)?;
    let grid = make_grid(&p, numerics.grid_n)?;
    let n = grid.len();
    let closed = |psi_dpsi: &dyn Fn(f64) -> (f64, f64), pi: &dyn Fn(f64) -> f64, theta: &dyn Fn(f64) -> f64| {
        let (psi, dpsi) = grid.nodes.iter().map(|&w| psi_dpsi(w)).unzip();
        let mut pi_star: Vec<f64> = grid.nodes.iter().map(|&w| pi(w)).collect();
        let mut theta_star: Vec<f64> = grid.nodes.iter().map(|&w| theta(w)).collect();
        pi_star[n - 1] = 0.0;
        theta_star[n - 1] = 0.0;
        Profile { params: p, grid: grid.clone(), psi, dpsi, pi_star, theta_star, residual_sup: 0.0, iterations: 0 }
    };
    if eps == f64::INFINITY {
        let k = p.hazard / p.rate;
        return Ok(closed(
            &|w| {
                let v = psi_worstcase(&p, w);
                let x = p.gap_ratio(w);
                let slope = if x > 0.0 { -k * p.rate * v / (p.consumption - p.rate * w) } else { 0.0 };
                (v, slope)
            },
            &|_| 0.0,
            &|_| 0.0,
        ));
    }
    if p.hazard == 0.0 {
        if eps == 0.0 {
            let jet = |w| {
                let j = psi_nonrobust_jet(&p, w);
                (j.value, j.d1)
            };
            return Ok(closed(&jet, &|w| pi_perpetual(&p, w), &|_| 0.0));
        }
        let jet = |w| {
            let j = psi_perpetual_jet(&p, w);
            (j.value, j.d1)
        };
        return Ok(closed(&jet, &|w| pi_perpetual(&p, w), &|w| theta_perpetual(&p, w)));
    }
    if eps == 0.0 {
        let jet = |w| {
            let j = psi_nonrobust_jet(&p, w);
            (j.value, j.d1)
        };
        return Ok(closed(&jet, &|w| pi_nonrobust(&p, w).unwrap_or(0.0), &|_| 0.0));
    }
    let sol = solve(&p, &grid, &numerics.options())?;
    Ok(Profile {
        params: p,
        grid: sol.grid,
        psi: sol.psi,
        dpsi: sol.dpsi,
        pi_star: sol.pi_star,
        theta_star: sol.theta_star,
        residual_sup: sol.residual_sup,
        iterations: sol.iterations,
    })
}

pub fn run(cli: &Cli, report: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(a, report),
        Command::Table1(a) => cmd_table1(a, report),
        Command::ExpandCheck(a) => cmd_expand_check(a, report),
        Command::McVerify(a) => cmd_mc_verify(a, report),
    }
}

fn say(report: &mut dyn Write, line: std::fmt::Arguments) {
    let _ = writeln!(report, "{line}");
}

pub fn cmd_solve(a: &SolveArgs, report: &mut dyn Write) -> Result<(), CliError> {
    let prof = profile(a.r, &a.market, a.eps, &a.numerics)?;
    write_file(&a.out, &prof.csv())?;
    say(report, format_args!("residual_sup={}", num(prof.residual_sup)));
    say(report, format_args!("iterations={}", prof.iterations));
    Ok(())
}

pub fn cmd_table1(a: &Table1Args, report: &mut dyn Write) -> Result<(), CliError> {
    if a.eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(ParamError::DeviationAmbiguity.into());
    }
    let base = a.market.params(a.r_list.first().copied().unwrap_or(0.02), 1.0)?;
    let cells = deviation_table(&base, &a.r_list, &a.eps_list, a.numerics.grid_n, &a.numerics.options());
    let mut first_error = None;
    let mut rows = Vec::with_capacity(cells.len());
    let pairs = a.r_list.iter().flat_map(|&r| a.eps_list.iter().map(move |&e| (r, e)));
    for ((r, eps), cell) in pairs.zip(cells) {
        let value = match cell {
            Ok(c) => c.max_deviation,
            Err(e) => {
                say(report, format_args!("r={r} eps={eps}: {e}"));
                first_error.get_or_insert(CliError::from(e));
                f64::NAN
            }
        };
        say(report, format_args!("r={r} eps={eps} max_deviation={value:.3}"));
        rows.push(vec![r, eps, value]);
    }
    write_file(&a.out, &csv("r,eps,max_deviation", rows))?;
    first_error.map_or(Ok(()), Err)
}

/// `sup |psi - (f0 + eps f1)|` over the grid.
pub fn expansion_error(prof: &Profile) -> Result<f64, CliError> {
    let p = &prof.params;
    let mut worst: f64 = 0.0;
    for (i, &w) in prof.grid.nodes.iter().enumerate() {
        worst = worst.max((prof.psi[i] - expansion(p, w, p.ambiguity)?).abs());
    }
    Ok(worst)
}

pub fn cmd_expand_check(a: &ExpandArgs, report: &mut dyn Write) -> Result<(), CliError> {
    if a.eps_list.len() < 2 {
        return Err(CliError::Usage("eps-list needs at least two values".into()));
    }
    let mut rows = Vec::with_capacity(a.eps_list.len());
    let mut prev: Option<f64> = None;
    for &eps in &a.eps_list {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(CliError::Usage(format!("eps-list entries must be finite and non-negative, got {eps}")));
        }
        let err = expansion_error(&profile(a.r, &a.market, eps, &a.numerics)?)?;
        let ratio = prev.map_or(f64::NAN, |e| err / e);
        say(report, format_args!("eps={eps} E={} ratio={}", num(err), num(ratio)));
        rows.push(vec![eps, err, ratio]);
        prev = Some(err);
    }
    if let Some(path) = &a.out {
        write_file(path, &csv("eps,max_error,ratio", rows))?;
    }
    Ok(())
}

/// One Monte Carlo check at a starting wealth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandCheck {
    pub w0: f64,
    pub psi: f64,
    pub estimate: Estimate,
    pub pass: bool,
}

/// Simulate under `pi*` and `theta_scale * theta*` from each `w0`.
pub fn mc_checks(a: &McArgs) -> Result<Vec<BandCheck>, CliError> {
    if !(a.eps > 0.0 && a.eps.is_finite()) {
        return Err(CliError::Usage("mc-verify needs a finite positive eps".into()));
    }
    if !(a.market.lambda > 0.0) {
        return Err(CliError::Usage("mc-verify needs a positive lambda".into()));
    }
    if !(a.dt > 0.0) || a.n_paths == 0 || !(a.t_max > 0.0) {
        return Err(CliError::Usage("dt, n-paths and t-max must be positive".into()));
    }
    let prof = profile(a.r, &a.market, a.eps, &a.numerics)?;
    let pi = PolicyTable::new(prof.grid.clone(), prof.pi_star.clone())?;
    let theta = PolicyTable::new(prof.grid.clone(), prof.theta_star.iter().map(|t| a.theta_scale * t).collect())?;
    let workers = a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let exact_theta = a.theta_scale == 1.0;
    Ok(a.w0_list
        .iter()
        .map(|&w0| {
            let sim = SimConfig { n_paths: a.n_paths, dt: a.dt, seed: a.seed, t_max: a.t_max, w0 };
            let estimate = estimate_objective(&prof.params, &pi, &theta, &sim, workers);
            let psi = prof.psi_at(w0);
            let band = 3.0 * estimate.std_error;
            let pass = if exact_theta { (estimate.mean - psi).abs() <= band } else { estimate.mean <= psi + band };
            BandCheck { w0, psi, estimate, pass }
        })
        .collect())
}

pub fn cmd_mc_verify(a: &McArgs, report: &mut dyn Write) -> Result<(), CliError> {
    let checks = mc_checks(a)?;
    for c in &checks {
        say(
            report,
            format_args!(
                "w0={} psi={} mc={} se={} safe_hit={} {}",
                c.w0,
                num(c.psi),
                num(c.estimate.mean),
                num(c.estimate.std_error),
                c.estimate.fraction_safe_hit,
                if c.pass { "PASS" } else { "FAIL" }
            ),
        );
    }
    if let Some(path) = &a.out {
        let rows = checks.iter().map(|c| {
            vec![c.w0, c.psi, c.estimate.mean, c.estimate.std_error, c.estimate.fraction_safe_hit, c.pass as u8 as f64]
        });
        write_file(path, &csv("w0,psi,mean,std_error,fraction_safe_hit,pass", rows))?;
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::Band { failed, total: checks.len() });
    }
    Ok(())
}
