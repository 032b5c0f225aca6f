//! Exact-engine invariants on random patterns and models, and closed-form
//! hitting laws for single-site patterns.

use gibbsfield::exact::{brute_force_hitting_law, check_invariants, exact_pattern_probability};
use gibbsfield::lattice::Pattern;
use gibbsfield::model::Model;
use proptest::prelude::*;

fn assert_all_hold(model: &Model, a: &Pattern, cap: usize) {
    let checks = check_invariants(model, a, cap).unwrap();
    for name in ["volume_bound", "first_moment", "gibbs_lower", "gibbs_upper"] {
        assert!(checks.iter().any(|c| c.name == name), "{name} not checked");
    }
    for c in &checks {
        assert!(
            c.holds,
            "{} at k = {:?}: {} vs {}",
            c.name, c.k, c.lhs, c.rhs
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn iid_line_patterns(p in 0.05f64..0.95, n in 0usize..3, cap in 1usize..5, seed in any::<u64>()) {
        let model = Model::bernoulli(1, p).unwrap();
        let values = (0..=n).map(|i| ((seed >> i) & 1) as u8).collect();
        let a = Pattern::new(1, n, 2, values).unwrap();
        assert_all_hold(&model, &a, cap);
    }

    #[test]
    fn iid_square_patterns(p in 0.05f64..0.95, cap in 1usize..3, bits in 0u8..16) {
        let model = Model::bernoulli(2, p).unwrap();
        let a = Pattern::new(2, 1, 2, (0..4).map(|i| (bits >> i) & 1).collect()).unwrap();
        assert_all_hold(&model, &a, cap);
    }

    #[test]
    fn ising_line_patterns(beta in 0.0f64..0.6, h in -0.5f64..0.5, n in 0usize..2, cap in 1usize..4, bits in 0u8..4) {
        let model = Model::ising(1, beta, 1.0, h).unwrap();
        let a = Pattern::new(1, n, 2, (0..=n).map(|i| (bits >> i) & 1).collect()).unwrap();
        assert_all_hold(&model, &a, cap);
    }

    #[test]
    fn markov_rows(a01 in 0.1f64..0.9, a10 in 0.1f64..0.9, bits in 0u8..16) {
        let model = Model::markov_product(vec![vec![1.0 - a01, a01], vec![a10, 1.0 - a10]]).unwrap();
        let a = Pattern::new(2, 1, 2, (0..4).map(|i| (bits >> i) & 1).collect()).unwrap();
        assert_all_hold(&model, &a, 1);
    }

    #[test]
    fn hitting_cdf_is_monotone(p in 0.05f64..0.95, bits in 0u8..8, cap in 1usize..6) {
        let model = Model::bernoulli(1, p).unwrap();
        let a = Pattern::new(1, 2, 2, (0..3).map(|i| (bits >> i) & 1).collect()).unwrap();
        let t = brute_force_hitting_law(&model, &a, cap).unwrap();
        prop_assert_eq!(t.cdf[0], 0.0);
        for k in 1..=cap {
            prop_assert!(t.cdf[k] + 1e-15 >= t.cdf[k - 1]);
            prop_assert!(t.cdf[k] <= t.cdf_with_origin[k] + 1e-15);
        }
    }
}

#[test]
fn single_site_hitting_law_is_geometric() {
    // A one-site pattern in d = 1 is hit among the k sites 1..=k.
    for &(p, symbol) in &[(0.3, 1u8), (0.3, 0), (0.8, 1)] {
        let model = Model::bernoulli(1, p).unwrap();
        let a = Pattern::new(1, 0, 2, vec![symbol]).unwrap();
        let t = brute_force_hitting_law(&model, &a, 8).unwrap();
        let q = if symbol == 1 { p } else { 1.0 - p };
        for k in 0..=8 {
            let expected = 1.0 - (1.0 - q).powi(k as i32);
            assert!(
                (t.cdf[k] - expected).abs() < 1e-12,
                "k = {k}: {} vs {expected}",
                t.cdf[k]
            );
        }
    }
}

#[test]
fn single_site_hitting_law_in_the_plane() {
    // Placements with |x| > 0 in [0, k]^2 number (k + 1)^2 - 1.
    let model = Model::bernoulli(2, 0.4).unwrap();
    let a = Pattern::new(2, 0, 2, vec![1]).unwrap();
    let t = brute_force_hitting_law(&model, &a, 3).unwrap();
    for k in 0..=3usize {
        let expected = 1.0 - 0.6f64.powi(((k + 1) * (k + 1) - 1) as i32);
        assert!((t.cdf[k] - expected).abs() < 1e-12);
    }
}

#[test]
fn pattern_probabilities_sum_to_one() {
    let models = [
        Model::bernoulli(2, 0.3).unwrap(),
        Model::ising(1, 0.4, 1.0, 0.2).unwrap(),
        Model::markov_product(vec![vec![0.9, 0.1], vec![0.4, 0.6]]).unwrap(),
    ];
    for model in &models {
        let (d, n) = (model.dim(), if model.dim() == 1 { 3 } else { 1 });
        let torus = (d == 1).then_some(12);
        let total: f64 = Pattern::all(d, n, 2)
            .map(|a| exact_pattern_probability(model, &a, torus).unwrap().value)
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }
}
