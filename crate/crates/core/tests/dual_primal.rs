mod common;

use common::dual_primal_gap;

const TOL: f64 = 1e-8;

#[test]
fn linear_dual_matches_primal_ridge() {
    for (i, lambda) in [1e-3, 1e-2, 1e-1, 1.0].into_iter().enumerate() {
        let gap = dual_primal_gap(100, lambda, 100 + i as u64);
        assert!(gap.prediction <= TOL, "lambda {lambda}: prediction gap {}", gap.prediction);
        assert!(gap.width <= TOL, "lambda {lambda}: width gap {}", gap.width);
    }
}
