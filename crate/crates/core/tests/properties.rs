use approx::assert_relative_eq;
use proptest::prelude::*;

use parted_core::dataset::{collect, BehaviorPolicy};
use parted_core::evaluation::evaluate;
use parted_core::linalg::{ridge_fit, ridge_objective, RidgeSystem};
use parted_core::linear::{solve_linear_parted, LinearPartedConfig};
use parted_core::mdp::{
    bellman_apply, exact_optimal_values, exact_policy_values, generate_random_mdp, Policy,
};
use parted_core::neural::{fit_reward_network, Activation, FitMode, OptimizerConfig, PenaltyPath, TwoLayerNet};
use parted_core::pessimism::ClipMode;

/// `(dim, vectors, targets)` with `n` samples.
fn samples(max_dim: usize, max_n: usize) -> impl Strategy<Value = (usize, Vec<Vec<f64>>, Vec<f64>)> {
    (1..=max_dim, 0..=max_n).prop_flat_map(|(d, n)| {
        (
            Just(d),
            prop::collection::vec(prop::collection::vec(-1.0..1.0f64, d), n),
            prop::collection::vec(-2.0..2.0f64, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ridge_solution_beats_every_perturbation(
        (d, vs, ys) in samples(6, 20),
        reg in 0.05..5.0f64,
    ) {
        let (_, x) = ridge_fit(d, &vs, &ys, reg).unwrap();
        let best = ridge_objective(&vs, &ys, reg, &x);
        for i in 0..d {
            for eps in [1e-4, -1e-4] {
                let mut y = x.clone();
                y[i] += eps;
                prop_assert!(ridge_objective(&vs, &ys, reg, &y) >= best);
            }
        }
    }

    #[test]
    fn more_data_never_raises_a_bonus(
        (d, vs, ys) in samples(5, 15),
        extra in prop::collection::vec(-1.0..1.0f64, 5),
        query in prop::collection::vec(-1.0..1.0f64, 5),
        reg in 0.1..3.0f64,
    ) {
        let before = RidgeSystem::from_samples(d, &vs, &ys, reg).unwrap();
        let mut more = vs.clone();
        more.push(extra[..d].to_vec());
        let after = RidgeSystem::from_samples(d, &more, &vec![0.0; more.len()], reg).unwrap();
        prop_assert!(after.bonus(&query[..d]) <= before.bonus(&query[..d]) + 1e-12);
        prop_assert!(after.log_det_ratio() >= before.log_det_ratio() - 1e-12);
        prop_assert!(before.log_det_ratio() >= -1e-12);
    }

    #[test]
    fn ridge_factor_reconstructs_gram((d, vs, ys) in samples(8, 30), reg in 0.1..3.0f64) {
        let sys = RidgeSystem::from_samples(d, &vs, &ys, reg).unwrap();
        prop_assert!(sys.reconstruction_error() <= 1e-12);
        prop_assert!(sys.min_pivot() > 0.0);
        let x = sys.solution();
        let back = sys.gram() * nalgebra::DVector::from_column_slice(&x);
        for (a, b) in back.iter().zip(sys.moment()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn optimal_values_are_a_dominating_fixed_point(
        seed in any::<u64>(),
        s in 1usize..=10,
        a in 1usize..=4,
        h in 1usize..=6,
        d in 1usize..=5,
        policy_seed in any::<u64>(),
    ) {
        let mdp = generate_random_mdp(seed, s, a, h, d, 1.0).unwrap();
        let opt = exact_optimal_values(&mdp);
        for step in 0..h {
            let q = bellman_apply(&mdp, step, &opt.v[step + 1]);
            for st in 0..s {
                let best = q[st].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!((opt.v[step][st] - best).abs() <= 1e-10);
                prop_assert!(opt.v[step][st] <= (h - step) as f64 + 1e-10);
                prop_assert!(opt.v[step][st] >= -1e-10);
            }
        }
        let actions = (0..h)
            .map(|step| (0..s).map(|st| ((policy_seed >> ((step * 7 + st) % 60)) as usize + st) % a).collect())
            .collect();
        for policy in [Policy::Deterministic(actions), Policy::uniform(h, s, a)] {
            let vals = exact_policy_values(&mdp, &policy);
            for step in 0..h {
                for st in 0..s {
                    prop_assert!(vals.v[step][st] <= opt.v[step][st] + 1e-10);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn estimates_respect_clip_and_decompose(
        seed in any::<u64>(),
        data_seed in any::<u64>(),
        n in 5usize..60,
        beta1 in 0.0..3.0f64,
        beta2 in 0.0..3.0f64,
        flat in any::<bool>(),
    ) {
        let mdp = generate_random_mdp(seed, 5, 3, 4, 3, 1.0).unwrap();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, n, data_seed, false).unwrap();
        let mut config = LinearPartedConfig::explicit(beta1, beta2);
        config.clip = if flat { ClipMode::Flat } else { ClipMode::PerStep };
        let sol = solve_linear_parted(&data, &mdp.feature_map(), &config).unwrap();
        let est = &sol.estimate;
        for (step, q) in est.q.iter().enumerate() {
            let ceiling = config.clip.ceiling(mdp.horizon, step);
            for row in q {
                for &v in row {
                    prop_assert!((0.0..=ceiling).contains(&v));
                }
            }
        }
        let report = evaluate(&mdp, est);
        prop_assert!(report.subopt >= -1e-10);
        prop_assert!(report.decomposition.residual <= 1e-8);
        prop_assert!(report.decomposition.greedy_gap <= 1e-10);
    }

    #[test]
    fn gradient_descent_stays_in_the_parameter_ball(
        seed in any::<u64>(),
        data_seed in any::<u64>(),
        n in 3usize..15,
        reg in 0.5..2.0f64,
    ) {
        let mdp = generate_random_mdp(seed, 3, 2, 2, 3, 1.0).unwrap();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, n, data_seed, false).unwrap();
        let net = TwoLayerNet::init_symmetric(seed, 4, 3, Activation::XTanh).unwrap();
        let opt = OptimizerConfig { max_iterations: 300, ..OptimizerConfig::default() };
        let fit = fit_reward_network(&data, &mdp.feature_map(), &net, reg, &opt, FitMode::Gd, PenaltyPath::Primal, 4096)
            .unwrap();
        prop_assert!(fit.diagnostics.within_ball());
    }
}
