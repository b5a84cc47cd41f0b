use proptest::prelude::*;
use robust_ruin::model::MIN_GRID_NODES;
use robust_ruin::{make_grid, ModelParams, ParamError};

proptest! {
    #[test]
    fn grid_spans_ruin_to_safe_level(r in 0.01..0.09f64, b_frac in 0.0..0.95f64, n in MIN_GRID_NODES..5000usize) {
        let p = ModelParams::new(r, 0.1, 0.15, 1.0, b_frac / r, 0.04, 1.0).unwrap();
        let g = make_grid(&p, n).unwrap();
        prop_assert_eq!(g.len(), n);
        prop_assert_eq!(g.nodes[0], p.ruin_level);
        prop_assert_eq!(g.nodes[n - 1], p.safe_level());
        prop_assert!(g.nodes.windows(2).all(|w| w[1] > w[0]));
        for (i, &w) in g.nodes.iter().enumerate().skip(1).take(n - 2) {
            let cell = g.locate(w + 0.5 * g.spacing);
            prop_assert!(cell == i || cell + 1 == i || cell == i + 1, "node {} cell {}", i, cell);
        }
    }

    #[test]
    fn ruin_at_or_above_safe_level_is_rejected(r in 0.01..0.09f64, over in 0.0..2.0f64) {
        let b = (1.0 + over) / r;
        let rejected = matches!(ModelParams::new(r, 0.1, 0.15, 1.0, b, 0.04, 1.0), Err(ParamError::RuinAboveSafe { .. }));
        prop_assert!(rejected);
    }
}

#[test]
fn grid_needs_enough_nodes() {
    let p = ModelParams::new(0.06, 0.1, 0.15, 1.0, 1.0, 0.04, 1.0).unwrap();
    assert!(make_grid(&p, MIN_GRID_NODES - 1).is_err());
    assert!(make_grid(&p, MIN_GRID_NODES).is_ok());
}
