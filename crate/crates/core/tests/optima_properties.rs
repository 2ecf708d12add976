use polarcap::instances::polarized_instance;
use polarcap::optima::{closed_form_form1, closed_form_naive, optimal_form1, optimal_form2, optimal_naive};
use polarcap::penalties::step_penalty;
use polarcap::{ConstraintParams, MeanMatrix, PolicyProfile};
use proptest::prelude::*;

fn means_strategy(max_n: usize, max_k: usize) -> impl Strategy<Value = MeanMatrix> {
    (1..=max_n, 2..=max_k).prop_flat_map(|(n, k)| {
        prop::collection::vec(prop::collection::vec(0.0f64..=1.0, k), n)
            .prop_map(|rows| MeanMatrix::new(rows).unwrap())
    })
}

/// Best value over the 0.005 grid of `(p[0][0], p[1][0])` for a 2 x 2 instance.
fn grid_best(value: impl Fn(&PolicyProfile) -> Option<f64>) -> f64 {
    let steps = 200;
    let mut best = f64::NEG_INFINITY;
    for a in 0..=steps {
        for b in 0..=steps {
            let (x, y) = (a as f64 / steps as f64, b as f64 / steps as f64);
            let p = PolicyProfile::new(vec![vec![x, 1.0 - x], vec![y, 1.0 - y]]).unwrap();
            if let Some(v) = value(&p) {
                best = best.max(v);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn capped_value_is_non_increasing_in_gamma(means in means_strategy(4, 4)) {
        let mut prev = f64::INFINITY;
        for step in 0..50 {
            let gamma = step as f64 / 49.0;
            let res = optimal_form1(&means, gamma).unwrap();
            prop_assert!(res.objective_value <= prev + 1e-7);
            prop_assert!(res.profile.gamma_violation(gamma) <= 1e-8);
            prev = res.objective_value;
        }
    }

    #[test]
    fn taxed_value_is_non_increasing_in_eta(means in means_strategy(4, 3), gamma in 0.0f64..=1.0) {
        let mut prev = f64::INFINITY;
        for step in 0..20 {
            let params = ConstraintParams::new(gamma, step as f64 * 0.25, 0.0).unwrap();
            let res = optimal_form2(&means, &params).unwrap();
            prop_assert!(res.objective_value <= prev + 1e-7);
            prev = res.objective_value;
        }
    }

    #[test]
    fn two_by_two_programs_beat_the_grid(
        means in means_strategy(2, 2).prop_filter("n = 2", |m| m.n() == 2),
        gamma in 0.0f64..=1.0,
        eta in 0.0f64..3.0,
    ) {
        let capped = optimal_form1(&means, gamma).unwrap().objective_value;
        let grid = grid_best(|p| (p.gamma_violation(gamma) <= 1e-12).then(|| means.expected_reward(p)));
        prop_assert!(capped >= grid - 1e-6);

        let params = ConstraintParams::new(gamma, eta, 0.0).unwrap();
        let taxed = optimal_form2(&means, &params).unwrap().objective_value;
        let grid = grid_best(|p| Some(means.expected_reward(p) - step_penalty(p, &params).total));
        prop_assert!(taxed >= grid - 1e-6);
    }

    #[test]
    fn naive_lp_matches_closed_form(n in 1usize..=10, frac in 0.0f64..1.0, t in 0.0f64..1.0) {
        let majority = n.div_ceil(2) + ((n - n.div_ceil(2)) as f64 * frac).round() as usize;
        let delta = t * majority as f64 / n as f64 * 0.999;
        let means = polarized_instance(n, majority).unwrap();
        let closed = closed_form_naive(n, majority, delta).unwrap();
        let lp = optimal_naive(&means, delta).unwrap();
        prop_assert!((lp.objective_value - means.expected_reward(&closed)).abs() < 1e-6);
    }

    #[test]
    fn capped_lp_matches_closed_form(n in 1usize..=10, frac in 0.0f64..=1.0, gamma in 0.0f64..=0.5) {
        let majority = (n as f64 * frac).round() as usize;
        let means = polarized_instance(n, majority).unwrap();
        let closed = closed_form_form1(n, majority, gamma).unwrap();
        let lp = optimal_form1(&means, gamma).unwrap();
        prop_assert!((lp.objective_value - means.expected_reward(&closed)).abs() < 1e-6);
        prop_assert!(closed.gamma_violation(gamma) <= 1e-12);
        for i in 0..n {
            let own: f64 = means.row(i).iter().zip(closed.row(i)).map(|(a, b)| a * b).sum();
            prop_assert!(own >= 1.0 - gamma - 1e-9);
        }
    }
}

#[test]
fn large_tax_recovers_cap_across_gammas() {
    let means = polarized_instance(4, 3).unwrap();
    for gamma in [0.1, 0.5, 0.9, 1.0] {
        let capped = optimal_form1(&means, gamma).unwrap().objective_value;
        let taxed = optimal_form2(&means, &ConstraintParams::new(gamma, 1e6, 0.0).unwrap()).unwrap().objective_value;
        assert!((capped - taxed).abs() < 1e-6, "gamma {gamma}: {capped} vs {taxed}");
    }
}
