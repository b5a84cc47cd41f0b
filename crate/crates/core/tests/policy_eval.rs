use proptest::prelude::*;
use robust_ruin::closed_forms::{pi_nonrobust, psi_worstcase};
use robust_ruin::policy_eval::{deviation_table, evaluate_fixed_policy, max_deviation, PolicyTable};
use robust_ruin::{make_grid, solve, ModelParams, SolverOptions};

fn base(r: f64, eps: f64) -> ModelParams {
    ModelParams::new(r, 0.1, 0.15, 1.0, 1.0, 0.04, eps).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn no_rule_beats_the_optimum(
        r in prop::sample::select(vec![0.02, 0.06]),
        eps in 0.2..15.0f64,
        scale in 0.0..2.0f64,
        tilt in -0.5..0.5f64,
    ) {
        let p = base(r, eps);
        let grid = make_grid(&p, 401).unwrap();
        let opts = SolverOptions::default();
        let best = solve(&p, &grid, &opts).unwrap();
        let ws = p.safe_level();
        let rule = PolicyTable::from_fn(grid.clone(), |w| {
            scale * best.pi_star[grid.locate(w)] * (1.0 + tilt * (w / ws - 0.5))
        });
        let fixed = evaluate_fixed_policy(&p, &rule, &grid, &opts).unwrap();
        for i in 0..grid.len() {
            prop_assert!(fixed.value[i] >= best.psi[i] - 1e-6);
            prop_assert!((-1e-6..=1.0 + 1e-6).contains(&fixed.value[i]));
        }
        for pair in fixed.value.windows(2) {
            prop_assert!(pair[1] <= pair[0] + 1e-6);
        }
    }
}

#[test]
fn optimal_rule_reproduces_the_solver() {
    let p = base(0.06, 5.0);
    let grid = make_grid(&p, 2001).unwrap();
    let opts = SolverOptions::default();
    let best = solve(&p, &grid, &opts).unwrap();
    let rule = PolicyTable::new(grid.clone(), best.pi_star.clone()).unwrap();
    let fixed = evaluate_fixed_policy(&p, &rule, &grid, &opts).unwrap();
    let gap = fixed.value.iter().zip(&best.psi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-4, "{gap:e}");
}

#[test]
fn holding_no_stock_gives_the_worst_case() {
    let p = base(0.02, 4.0);
    let grid = make_grid(&p, 4001).unwrap();
    let rule = PolicyTable::from_fn(grid.clone(), |_| 0.0);
    let fixed = evaluate_fixed_policy(&p, &rule, &grid, &SolverOptions::default()).unwrap();
    for (i, &w) in grid.nodes.iter().enumerate() {
        assert!((fixed.value[i] - psi_worstcase(&p, w)).abs() < 1e-4, "w {w}");
    }
}

#[test]
fn deviation_grows_with_ambiguity() {
    let p = base(0.06, 1.0);
    let opts = SolverOptions::default();
    let cells = deviation_table(&p, &[0.06], &[1.0, 4.0, 12.0], 801, &opts);
    let raw: Vec<f64> = cells.into_iter().map(|c| c.unwrap().raw).collect();
    assert!(raw.windows(2).all(|w| w[1] >= w[0]), "{raw:?}");
    assert!(raw[0] > 0.0);
    assert_eq!(max_deviation(&p.with_ambiguity(12.0).unwrap(), 801, &opts).unwrap(), raw[2]);
}

#[test]
fn nonrobust_rule_is_optimal_without_ambiguity_limit() {
    let p = base(0.06, 0.05);
    let grid = make_grid(&p, 801).unwrap();
    let opts = SolverOptions::default();
    let best = solve(&p, &grid, &opts).unwrap();
    let rule = PolicyTable::from_fn(grid.clone(), |w| pi_nonrobust(&p, w).unwrap());
    let fixed = evaluate_fixed_policy(&p, &rule, &grid, &opts).unwrap();
    let gap = fixed.value.iter().zip(&best.psi).map(|(a, b)| a - b).fold(0.0, f64::max);
    assert!(gap < 1e-4, "{gap:e}");
}
