//! Monte Carlo estimate of the robust objective under feedback controls.
//!
//! Wealth is simulated directly under the distorted measure,
//!
//! ```text
//! dW = [r W + (mu + sigma theta(W) - r) pi(W) - c] dt + sigma pi(W) dB,
//! ```
//!
//! with Euler-Maruyama steps. Each path draws an exponential death time once,
//! stops at ruin, death, the safe level or a truncation horizon, and records
//! the entropy penalty `int theta^2 / 2 dt` up to that point. The per-path
//! objective is `1{ruin before death} - penalty / eps`.
//!
//! Path `i` runs its own xoshiro256++ generator whose state is expanded by
//! SplitMix64 from a hash of `(seed, i)`. Paths are aggregated in fixed blocks
//! in index order, so estimates are bit-identical for any number of worker
//! threads.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::model::ModelParams;
use crate::policy_eval::PolicyTable;

/// Paths per aggregation block.
const BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_paths: usize,
    /// Time step in years.
    pub dt: f64,
    pub seed: u64,
    /// Paths still alive at this horizon are counted as not ruined.
    pub t_max: f64,
    pub w0: f64,
}

impl SimConfig {
    pub fn new(w0: f64, n_paths: usize, seed: u64) -> Self {
        SimConfig { n_paths, dt: 1e-3, seed, t_max: 400.0, w0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitReason {
    Ruin,
    Death,
    SafeHit,
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub ruined_before_death: bool,
    /// `int theta^2 / 2 dt` up to the exit time.
    pub penalty_integral: f64,
    pub exit_reason: ExitReason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub fraction_safe_hit: f64,
    pub fraction_truncated: f64,
    pub ruin_frequency: f64,
    /// Average penalty integral, before division by `eps`.
    pub mean_penalty: f64,
}

/// Policy pair laid out per grid cell for fast interpolation:
/// `[pi_i, theta_i, pi_{i+1} - pi_i, theta_{i+1} - theta_i]`.
struct Controls {
    cells: Vec<[f64; 4]>,
    lo: f64,
    hi: f64,
    inv_h: f64,
}

const SHIFT: f64 = 4_503_599_627_370_496.0;

impl Controls {
    fn new(pi: &PolicyTable, theta: Option<&PolicyTable>) -> Controls {
        let n = pi.grid.len();
        let th_nodes: Vec<f64> = match theta {
            Some(t) if t.grid == pi.grid => t.pi.clone(),
            Some(t) => pi.grid.nodes.iter().map(|&w| t.value_at(w)).collect(),
            None => vec![0.0; n],
        };
        let th = |i: usize| th_nodes[i];
        let cells = (0..n - 1)
            .map(|i| [pi.pi[i], th(i), pi.pi[i + 1] - pi.pi[i], th(i + 1) - th(i)])
            .collect();
        Controls { cells, lo: pi.grid.nodes[0], hi: pi.grid.nodes[n - 1], inv_h: 1.0 / pi.grid.spacing }
    }

    #[inline(always)]
    fn at(&self, w: f64) -> (f64, f64) {
        // floor by rounding s - 1/2 against 2^52; exact integers may land on
        // the previous cell with f = 1, which interpolates to the same value
        let s = (w - self.lo) * self.inv_h;
        let shifted = (s - 0.5) + SHIFT;
        let i = (shifted.to_bits() as u32 as usize).min(self.cells.len() - 1);
        let f = s - (shifted - SHIFT);
        let c = &self.cells[i];
        (c[0] + f * c[2], c[1] + f * c[3])
    }
}

/// SplitMix64 output function, a bijection on `u64`.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for path `index`.
pub fn path_rng(seed: u64, index: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(mix(seed).wrapping_add(mix(index.wrapping_add(0x9e37_79b9_7f4a_7c15))))
}

/// Simulate one path from `sim.w0`.
pub fn simulate_path(
    p: &ModelParams,
    pi: &PolicyTable,
    theta: &PolicyTable,
    sim: &SimConfig,
    rng: &mut Xoshiro256PlusPlus,
) -> PathOutcome {
    let ctl = Controls::new(pi, Some(theta));
    let stepper = Stepper::new(p, &ctl, sim);
    let path = match stepper.start(rng.clone()) {
        Ok(path) => path,
        Err(done) => return done,
    };
    let mut lanes = Lanes::<1>::filled(&path, stepper.w0);
    loop {
        stepper.advance(&mut lanes);
        if let Some(done) = stepper.settle(&lanes, 0) {
            *rng = lanes.rng[0].clone();
            return done;
        }
    }
}

/// Constants of the Euler scheme shared by all paths.
struct Stepper<'a> {
    ctl: &'a Controls,
    rate: f64,
    consumption: f64,
    excess: f64,
    volatility: f64,
    hazard: f64,
    dt: f64,
    vol_dt: f64,
    t_max: f64,
    w0: f64,
}

/// A path before its first step.
struct PathStart {
    rng: Xoshiro256PlusPlus,
    /// Index of the step that contains the horizon.
    last_step: u64,
    death: f64,
    horizon: f64,
}

/// `L` paths stored field by field so that one step of all of them
/// overlaps in the pipeline.
struct Lanes<const L: usize> {
    rng: [Xoshiro256PlusPlus; L],
    w: [f64; L],
    /// Wealth before the last step.
    prev: [f64; L],
    /// Sum of `theta^2` over the steps taken.
    sq_sum: [f64; L],
    step: [u64; L],
    last_step: [u64; L],
    death: [f64; L],
    horizon: [f64; L],
}

impl<const L: usize> Lanes<L> {
    fn filled(s: &PathStart, w0: f64) -> Self {
        Lanes {
            rng: std::array::from_fn(|_| s.rng.clone()),
            w: [w0; L],
            prev: [w0; L],
            sq_sum: [0.0; L],
            step: [0; L],
            last_step: [s.last_step; L],
            death: [s.death; L],
            horizon: [s.horizon; L],
        }
    }

    fn load(&mut self, k: usize, s: PathStart, w0: f64) {
        self.rng[k] = s.rng;
        self.w[k] = w0;
        self.prev[k] = w0;
        self.sq_sum[k] = 0.0;
        self.step[k] = 0;
        self.last_step[k] = s.last_step;
        self.death[k] = s.death;
        self.horizon[k] = s.horizon;
    }

    /// Keep lane `k` stepping on a copy of lane `from` without ever exiting at the horizon.
    fn idle(&mut self, k: usize, from: usize) {
        self.rng[k] = self.rng[from].clone();
        self.w[k] = self.w[from];
        self.prev[k] = self.w[from];
        self.sq_sum[k] = 0.0;
        self.step[k] = 0;
        self.last_step[k] = u64::MAX;
        self.death[k] = f64::INFINITY;
        self.horizon[k] = f64::INFINITY;
    }
}

impl<'a> Stepper<'a> {
    fn new(p: &ModelParams, ctl: &'a Controls, sim: &SimConfig) -> Self {
        Stepper {
            ctl,
            rate: p.rate,
            consumption: p.consumption,
            excess: p.drift - p.rate,
            volatility: p.volatility,
            hazard: p.hazard,
            dt: sim.dt,
            vol_dt: p.volatility * sim.dt.sqrt(),
            t_max: sim.t_max,
            w0: sim.w0,
        }
    }

    /// Draw the death time, or settle paths that start outside `(b, w_s)`.
    fn start(&self, mut rng: Xoshiro256PlusPlus) -> Result<PathStart, PathOutcome> {
        if self.w0 <= self.ctl.lo {
            return Err(PathOutcome { ruined_before_death: true, penalty_integral: 0.0, exit_reason: ExitReason::Ruin });
        }
        if self.w0 >= self.ctl.hi {
            return Err(PathOutcome { ruined_before_death: false, penalty_integral: 0.0, exit_reason: ExitReason::SafeHit });
        }
        let death = if self.hazard > 0.0 {
            let e: f64 = Exp1.sample(&mut rng);
            e / self.hazard
        } else {
            f64::INFINITY
        };
        let horizon = death.min(self.t_max);
        // first step whose right end reaches the horizon
        let mut last_step = (horizon / self.dt).ceil().max(1.0) as u64;
        while last_step > 1 && (last_step - 1) as f64 * self.dt >= horizon {
            last_step -= 1;
        }
        while (last_step as f64 * self.dt) < horizon {
            last_step += 1;
        }
        Ok(PathStart { rng, last_step, death, horizon })
    }

    /// Step every lane until one of them leaves `(b, w_s)` or reaches its last step.
    fn advance<const L: usize>(&self, s: &mut Lanes<L>) {
        let (lo, hi) = (self.ctl.lo, self.ctl.hi);
        let a = 1.0 + self.rate * self.dt;
        let c = self.consumption * self.dt;
        let e = self.excess * self.dt;
        let v = self.volatility * self.dt;
        let vol_dt = self.vol_dt;
        let ctl = self.ctl;
        let mut room = u64::MAX;
        for k in 0..L {
            room = room.min(s.last_step[k] - s.step[k]);
        }
        let mut taken = 0;
        while taken < room {
            // draws first, so the arithmetic below runs without calls
            let z: [f64; L] = std::array::from_fn(|k| StandardNormal.sample(&mut s.rng[k]));
            let mut out = false;
            for k in 0..L {
                let w = s.w[k];
                let (pi_w, th_w) = ctl.at(w);
                let z = z[k];
                let next = a * w - c + (e + v * th_w + vol_dt * z) * pi_w;
                s.prev[k] = w;
                s.w[k] = next;
                s.sq_sum[k] += th_w * th_w;
                out |= (next <= lo) | (next >= hi);
            }
            taken += 1;
            if out {
                break;
            }
        }
        for k in 0..L {
            s.step[k] += taken;
        }
    }

    /// Outcome of lane `k` if its last step crossed a barrier or reached the horizon.
    fn settle<const L: usize>(&self, s: &Lanes<L>, k: usize) -> Option<PathOutcome> {
        let (b, dt) = (self.ctl.lo, self.dt);
        let (w, next) = (s.prev[k], s.w[k]);
        if next > b && next < self.ctl.hi && s.step[k] < s.last_step[k] {
            return None;
        }
        let th = self.ctl.at(w).1;
        let half_sq = 0.5 * th * th;
        let t_end = s.step[k] as f64 * dt;
        let total = 0.5 * s.sq_sum[k] * dt;
        if next <= b {
            let tau = t_end - dt + dt * (w - b) / (w - next);
            if tau < s.horizon[k] {
                return Some(PathOutcome {
                    ruined_before_death: true,
                    penalty_integral: total - half_sq * (t_end - tau),
                    exit_reason: ExitReason::Ruin,
                });
            }
        }
        if s.step[k] >= s.last_step[k] {
            let exit_reason = if s.death[k] <= self.t_max { ExitReason::Death } else { ExitReason::Truncated };
            return Some(PathOutcome {
                ruined_before_death: false,
                penalty_integral: total - half_sq * (t_end - s.horizon[k]),
                exit_reason,
            });
        }
        if next >= self.ctl.hi {
            return Some(PathOutcome { ruined_before_death: false, penalty_integral: total, exit_reason: ExitReason::SafeHit });
        }
        None
    }
}

/// Paths advanced together so that their step latencies overlap.
const LANES: usize = 4;

/// Outcomes of paths `range`, in index order.
///
/// Lanes step in lockstep; a lane that exits is settled and refilled with
/// the next path of the range, and lanes left without a path idle on a copy
/// of a live one until the range is drained.
fn run_range(stepper: &Stepper, seed: u64, range: std::ops::Range<usize>, out: &mut Vec<PathOutcome>) {
    let base = range.start;
    out.clear();
    out.resize(range.len(), PathOutcome { ruined_before_death: false, penalty_integral: 0.0, exit_reason: ExitReason::Death });
    let mut next = range.start;
    let mut launch = |out: &mut Vec<PathOutcome>| -> Option<(usize, PathStart)> {
        while next < range.end {
            let i = next;
            next += 1;
            match stepper.start(path_rng(seed, i as u64)) {
                Ok(state) => return Some((i, state)),
                Err(done) => out[i - base] = done,
            }
        }
        None
    };
    let Some((first, start)) = launch(out) else {
        return;
    };
    let mut lanes = Lanes::<LANES>::filled(&start, stepper.w0);
    let mut owner: [Option<usize>; LANES] = [None; LANES];
    lanes.load(0, start, stepper.w0);
    owner[0] = Some(first);
    let mut live = 1;
    for k in 1..LANES {
        match launch(out) {
            Some((i, st)) => {
                lanes.load(k, st, stepper.w0);
                owner[k] = Some(i);
                live += 1;
            }
            None => lanes.idle(k, 0),
        }
    }
    while live > 0 {
        stepper.advance(&mut lanes);
        for k in 0..LANES {
            let Some(done) = stepper.settle(&lanes, k) else {
                continue;
            };
            if let Some(i) = owner[k] {
                out[i - base] = done;
                live -= 1;
            }
            match launch(out) {
                Some((i, st)) => {
                    lanes.load(k, st, stepper.w0);
                    owner[k] = Some(i);
                    live += 1;
                }
                None => {
                    owner[k] = None;
                    if let Some(j) = owner.iter().position(|o| o.is_some()) {
                        lanes.idle(k, j);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    sum: f64,
    sum_sq: f64,
    ruined: usize,
    safe: usize,
    truncated: usize,
    penalty: f64,
}

impl Tally {
    fn add(&mut self, o: &PathOutcome, inv_eps: f64) {
        let x = if o.ruined_before_death { 1.0 } else { 0.0 } - o.penalty_integral * inv_eps;
        self.sum += x;
        self.sum_sq += x * x;
        self.ruined += o.ruined_before_death as usize;
        self.safe += (o.exit_reason == ExitReason::SafeHit) as usize;
        self.truncated += (o.exit_reason == ExitReason::Truncated) as usize;
        self.penalty += o.penalty_integral;
    }

    fn merge(&mut self, o: &Tally) {
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self.ruined += o.ruined;
        self.safe += o.safe;
        self.truncated += o.truncated;
        self.penalty += o.penalty;
    }
}

fn run_blocks(p: &ModelParams, ctl: &Controls, sim: &SimConfig, workers: usize) -> Tally {
    let inv_eps = if p.ambiguity > 0.0 { 1.0 / p.ambiguity } else { 0.0 };
    let n_blocks = sim.n_paths.div_ceil(BLOCK);
    let next = AtomicUsize::new(0);
    let stepper = Stepper::new(p, ctl, sim);
    let block = |k: usize| {
        let mut tally = Tally::default();
        let mut outcomes = Vec::with_capacity(BLOCK);
        run_range(&stepper, sim.seed, k * BLOCK..((k + 1) * BLOCK).min(sim.n_paths), &mut outcomes);
        for o in &outcomes {
            tally.add(o, inv_eps);
        }
        tally
    };
    let workers = workers.clamp(1, n_blocks.max(1));
    let mut tallies = vec![Tally::default(); n_blocks];
    if workers == 1 {
        for (k, t) in tallies.iter_mut().enumerate() {
            *t = block(k);
        }
    } else {
        let done: Vec<Vec<(usize, Tally)>> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut out = Vec::new();
                        loop {
                            let k = next.fetch_add(1, Ordering::Relaxed);
                            if k >= n_blocks {
                                break;
                            }
                            out.push((k, block(k)));
                        }
                        out
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for (k, t) in done.into_iter().flatten() {
            tallies[k] = t;
        }
    }
    let mut total = Tally::default();
    for t in &tallies {
        total.merge(t);
    }
    total
}

/// Estimate the robust objective from `sim.w0` with `workers` threads.
pub fn estimate_objective(
    p: &ModelParams,
    pi: &PolicyTable,
    theta: &PolicyTable,
    sim: &SimConfig,
    workers: usize,
) -> Estimate {
    let ctl = Controls::new(pi, Some(theta));
    summarize(run_blocks(p, &ctl, sim, workers), sim.n_paths)
}

fn summarize(t: Tally, n: usize) -> Estimate {
    let nf = n as f64;
    let mean = t.sum / nf;
    let var = if n > 1 { ((t.sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    Estimate {
        mean,
        std_error: (var / nf).sqrt(),
        n_paths: n,
        fraction_safe_hit: t.safe as f64 / nf,
        fraction_truncated: t.truncated as f64 / nf,
        ruin_frequency: t.ruined as f64 / nf,
        mean_penalty: t.penalty / nf,
    }
}

/// Fraction of paths under the reference measure that reach the safe level
/// before ruin and death.
pub fn safe_level_frequency(p: &ModelParams, pi: &PolicyTable, sim: &SimConfig, workers: usize) -> f64 {
    let ctl = Controls::new(pi, None);
    let t = run_blocks(&ModelParams { ambiguity: 0.0, ..*p }, &ctl, sim, workers);
    t.safe as f64 / sim.n_paths as f64
}
