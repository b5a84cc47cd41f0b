use robust_ruin_wasm::{expansion_curves, policy_gap, ruin_curves};

fn columns(flat: &[f64], n: usize) -> Vec<&[f64]> {
    assert_eq!(flat.len() % n, 0);
    flat.chunks(n).collect()
}

#[test]
fn ruin_curves_are_ordered() {
    let n = 201;
    let flat = ruin_curves(0.06, 0.04, 5.0, n).unwrap();
    let c = columns(&flat, n);
    assert_eq!(c.len(), 6);
    assert_eq!(c[0][0], 1.0);
    assert!((c[0][n - 1] - 1.0 / 0.06).abs() < 1e-12);
    for i in 0..n {
        assert!(c[2][i] <= c[1][i] + 1e-6 && c[1][i] <= c[3][i] + 1e-6, "node {i}");
        assert!(c[4][i] <= c[5][i] + 1e-6, "node {i}");
    }
}

#[test]
fn expansion_is_close_for_small_ambiguity() {
    let n = 401;
    let flat = expansion_curves(0.06, 0.04, 0.1, n).unwrap();
    let c = columns(&flat, n);
    assert_eq!(c.len(), 3);
    let gap = c[1].iter().zip(c[2]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap < 1e-3, "{gap:e}");
}

#[test]
fn ignoring_ambiguity_costs_ruin_probability() {
    let n = 201;
    let flat = policy_gap(0.06, 0.04, 10.0, n).unwrap();
    let c = columns(&flat, n);
    assert_eq!(c.len(), 3);
    assert!(c[2].iter().zip(c[1]).all(|(naive, best)| naive >= &(best - 1e-6)));
    assert!(c[2].iter().zip(c[1]).any(|(naive, best)| naive - best > 1e-2));
}

#[test]
fn bad_input_is_an_error_message() {
    assert!(ruin_curves(0.2, 0.04, 5.0, 101).unwrap_err().contains("mu"));
    assert!(ruin_curves(0.06, 0.04, 5.0, 3).is_err());
    assert!(policy_gap(0.06, 0.04, 0.0, 101).is_err());
}
