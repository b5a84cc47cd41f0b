use proptest::prelude::*;
use robust_ruin::montecarlo::{estimate_objective, path_rng, safe_level_frequency, simulate_path, ExitReason, SimConfig};
use robust_ruin::policy_eval::PolicyTable;
use robust_ruin::{make_grid, solve, ModelParams, SolverOptions};

struct Setup {
    p: ModelParams,
    pi: PolicyTable,
    theta: PolicyTable,
}

fn setup(eps: f64) -> Setup {
    let p = ModelParams::new(0.06, 0.1, 0.15, 1.0, 1.0, 0.04, eps).unwrap();
    let grid = make_grid(&p, 801).unwrap();
    let sol = solve(&p, &grid, &SolverOptions::default()).unwrap();
    let pi = PolicyTable::new(grid.clone(), sol.pi_star).unwrap();
    let theta = PolicyTable::new(grid, sol.theta_star).unwrap();
    Setup { p, pi, theta }
}

fn coarse(w0: f64, n_paths: usize, seed: u64) -> SimConfig {
    SimConfig { dt: 1e-2, t_max: 150.0, ..SimConfig::new(w0, n_paths, seed) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn same_estimate_for_any_worker_count(seed in any::<u64>(), n in 1usize..2500, workers in 2usize..6) {
        let s = setup(5.0);
        let sim = coarse(6.0, n, seed);
        let one = estimate_objective(&s.p, &s.pi, &s.theta, &sim, 1);
        prop_assert_eq!(one, estimate_objective(&s.p, &s.pi, &s.theta, &sim, workers));
        prop_assert_eq!(one, estimate_objective(&s.p, &s.pi, &s.theta, &sim, 1));
    }

    #[test]
    fn objective_is_ruin_frequency_minus_scaled_penalty(seed in any::<u64>(), w0 in 2.0..16.0f64) {
        let s = setup(5.0);
        let e = estimate_objective(&s.p, &s.pi, &s.theta, &coarse(w0, 400, seed), 1);
        prop_assert!((e.mean - (e.ruin_frequency - e.mean_penalty / s.p.ambiguity)).abs() <= 1e-12);
        prop_assert!(e.mean_penalty >= 0.0);
        for f in [e.ruin_frequency, e.fraction_safe_hit, e.fraction_truncated] {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        prop_assert!(e.ruin_frequency + e.fraction_safe_hit + e.fraction_truncated <= 1.0 + 1e-12);
    }
}

#[test]
fn estimate_aggregates_the_single_paths() {
    let s = setup(5.0);
    let sim = coarse(5.0, 300, 17);
    let e = estimate_objective(&s.p, &s.pi, &s.theta, &sim, 3);
    let mut ruined = 0usize;
    let mut safe = 0usize;
    let mut penalty = 0.0;
    for i in 0..sim.n_paths as u64 {
        let o = simulate_path(&s.p, &s.pi, &s.theta, &sim, &mut path_rng(sim.seed, i));
        ruined += o.ruined_before_death as usize;
        safe += (o.exit_reason == ExitReason::SafeHit) as usize;
        penalty += o.penalty_integral;
    }
    let n = sim.n_paths as f64;
    assert_eq!(e.ruin_frequency, ruined as f64 / n);
    assert_eq!(e.fraction_safe_hit, safe as f64 / n);
    assert!((e.mean_penalty - penalty / n).abs() <= 1e-12 * (penalty / n).max(1.0));
}

#[test]
fn one_path_estimate() {
    let s = setup(5.0);
    let sim = coarse(8.0, 1, 3);
    let o = simulate_path(&s.p, &s.pi, &s.theta, &sim, &mut path_rng(3, 0));
    let e = estimate_objective(&s.p, &s.pi, &s.theta, &sim, 4);
    assert_eq!(e.n_paths, 1);
    assert_eq!(e.std_error, 0.0);
    assert_eq!(e.ruin_frequency, o.ruined_before_death as u8 as f64);
    assert_eq!(e.mean_penalty, o.penalty_integral);
}

#[test]
fn no_distortion_costs_nothing() {
    let s = setup(5.0);
    let zero = PolicyTable::from_fn(s.pi.grid.clone(), |_| 0.0);
    let e = estimate_objective(&s.p, &s.pi, &zero, &coarse(10.0, 500, 8), 2);
    assert_eq!(e.mean_penalty, 0.0);
    assert_eq!(e.mean, e.ruin_frequency);
}

#[test]
fn reference_measure_rarely_reaches_the_safe_level() {
    let s = setup(5.0);
    let sim = coarse(14.0, 2000, 11);
    let freq = safe_level_frequency(&s.p, &s.pi, &sim, 2);
    assert!(freq <= 1e-3, "{freq}");
    assert_eq!(freq, safe_level_frequency(&s.p, &s.pi, &sim, 1));
}
