use proptest::prelude::*;

use psrl_zsg::matrix_game::{best_response_value, solve_matrix_game, Side};

fn matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(m, n)| prop::collection::vec(prop::collection::vec(-1.0f64..=0.0, n), m))
}

fn transpose_negate(g: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..g[0].len()).map(|j| g.iter().map(|row| -row[j]).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn value_lies_between_pure_security_levels(g in matrix()) {
        let sol = solve_matrix_game(&g, 1e-9).unwrap();
        let lower = g.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).fold(f64::NEG_INFINITY, f64::max);
        let upper = (0..g[0].len()).map(|j| g.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max)).fold(f64::INFINITY, f64::min);
        prop_assert!(sol.value >= lower - 1e-9 && sol.value <= upper + 1e-9);
        prop_assert!(sol.duality_gap <= 1e-9);
    }

    #[test]
    fn strategies_guarantee_the_value(g in matrix()) {
        let sol = solve_matrix_game(&g, 1e-9).unwrap();
        prop_assert!(best_response_value(&g, &sol.row_strategy, Side::Row).unwrap() >= sol.value - 1e-9);
        prop_assert!(best_response_value(&g, &sol.col_strategy, Side::Column).unwrap() <= sol.value + 1e-9);
    }

    #[test]
    fn shift_moves_value_by_the_constant(g in matrix(), c in -3.0f64..3.0) {
        let shifted: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|x| x + c).collect()).collect();
        let v = solve_matrix_game(&g, 1e-9).unwrap().value;
        let w = solve_matrix_game(&shifted, 1e-9).unwrap().value;
        prop_assert!((w - v - c).abs() <= 2e-9);
    }

    #[test]
    fn swapping_roles_negates_value(g in matrix()) {
        let v = solve_matrix_game(&g, 1e-9).unwrap().value;
        let w = solve_matrix_game(&transpose_negate(&g), 1e-9).unwrap().value;
        prop_assert!((v + w).abs() <= 2e-9);
    }

    #[test]
    fn positive_scaling_scales_value(g in matrix(), k in 0.1f64..5.0) {
        let scaled: Vec<Vec<f64>> = g.iter().map(|r| r.iter().map(|x| k * x).collect()).collect();
        let v = solve_matrix_game(&g, 1e-9).unwrap().value;
        let w = solve_matrix_game(&scaled, 1e-8).unwrap().value;
        prop_assert!((w - k * v).abs() <= 1e-8);
    }
}

#[test]
fn rock_paper_scissors_is_uniform() {
    let g = vec![vec![0.0, -1.0, 1.0], vec![1.0, 0.0, -1.0], vec![-1.0, 1.0, 0.0]];
    let sol = solve_matrix_game(&g, 1e-9).unwrap();
    assert!(sol.value.abs() <= 1e-9);
    for p in sol.row_strategy.probs().iter().chain(sol.col_strategy.probs()) {
        assert!((p - 1.0 / 3.0).abs() <= 1e-6);
    }
}

#[test]
fn solution_json_uses_documented_field_names() {
    let sol = solve_matrix_game(&[vec![1.0, -1.0], vec![-1.0, 1.0]], 1e-9).unwrap();
    let v: serde_json::Value = serde_json::to_value(&sol).unwrap();
    for key in ["value", "row_strategy", "col_strategy", "gap"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}
