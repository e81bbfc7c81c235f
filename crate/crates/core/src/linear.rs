//! Linear-feature solver: trajectory-level reward redistribution followed by
//! pessimistic value iteration with a two-part penalty.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::OfflineDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{dot, norm, ridge_fit, RidgeSystem};
use crate::mdp::{QTable, VTable};
use crate::pessimism::{ClipMode, ValueEstimate};

/// Ordered as in [`SolverKind::ALL`], which is also the order of the tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    PartedLinear,
    PartedNeural,
    PeviOracle,
    UniformSplit,
}

impl SolverKind {
    pub const ALL: [SolverKind; 4] = [
        SolverKind::PartedLinear,
        SolverKind::PartedNeural,
        SolverKind::PeviOracle,
        SolverKind::UniformSplit,
    ];

    /// Position in [`SolverKind::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn tag(self) -> &'static str {
        match self {
            SolverKind::PartedLinear => "parted-linear",
            SolverKind::PartedNeural => "parted-neural",
            SolverKind::PeviOracle => "pevi-oracle",
            SolverKind::UniformSplit => "uniform-split",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

/// Penalty multipliers, either given directly or from the high-probability
/// formulas with free absolute constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinearBeta {
    Explicit { beta1: f64, beta2: f64 },
    Theorem2 { c_beta1: f64, c_beta2: f64, delta: f64 },
}

impl Default for LinearBeta {
    fn default() -> Self {
        LinearBeta::Theorem2 {
            c_beta1: 0.005,
            c_beta2: 0.005,
            delta: 0.1,
        }
    }
}

impl LinearBeta {
    pub fn resolve(&self, dim: usize, horizon: usize, n: usize) -> Result<(f64, f64)> {
        match *self {
            LinearBeta::Explicit { beta1, beta2 } => {
                check_nonneg("beta1", beta1)?;
                check_nonneg("beta2", beta2)?;
                Ok((beta1, beta2))
            }
            LinearBeta::Theorem2 {
                c_beta1,
                c_beta2,
                delta,
            } => {
                check_nonneg("c_beta1", c_beta1)?;
                check_nonneg("c_beta2", c_beta2)?;
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::InvalidParameter {
                        name: "delta",
                        reason: format!("must lie in (0, 1), got {delta}"),
                    });
                }
                Ok(theorem2_betas(c_beta1, c_beta2, delta, dim, horizon, n))
            }
        }
    }
}

/// `β₁ = c₁·H·√(dH·ln(N/δ))`, `β₂ = c₂·d·H²·√(ln(d·H³·N^{5/2}/δ))`.
pub fn theorem2_betas(c_beta1: f64, c_beta2: f64, delta: f64, dim: usize, horizon: usize, n: usize) -> (f64, f64) {
    let (d, h, n) = (dim as f64, horizon as f64, n as f64);
    let beta1 = c_beta1 * h * libm::sqrt(d * h * libm::log(n / delta).max(0.0));
    let inner = libm::log(d) + 3.0 * libm::log(h) + 2.5 * libm::log(n) - libm::log(delta);
    let beta2 = c_beta2 * d * h * h * libm::sqrt(inner.max(0.0));
    (beta1, beta2)
}

fn check_nonneg(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and non-negative, got {value}"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearPartedConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub beta: LinearBeta,
    pub clip: ClipMode,
}

impl Default for LinearPartedConfig {
    fn default() -> Self {
        Self {
            lambda1: 1.0,
            lambda2: 1.0,
            beta: LinearBeta::default(),
            clip: ClipMode::PerStep,
        }
    }
}

impl LinearPartedConfig {
    pub fn explicit(beta1: f64, beta2: f64) -> Self {
        Self {
            beta: LinearBeta::Explicit { beta1, beta2 },
            ..Self::default()
        }
    }

    /// Hard errors for invalid values, warnings for legal but unusual ones.
    pub fn validate(&self) -> Result<Vec<Warning>> {
        let mut warnings = Vec::new();
        for (name, value) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            crate::linalg::check_reg(value)?;
            if value < 1.0 {
                warnings.push(Warning::SmallRegularization {
                    parameter: name.into(),
                    value,
                });
            }
        }
        Ok(warnings)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    SmallRegularization { parameter: String, value: f64 },
    FewTrajectories { n: usize, dim: usize },
    FitNotConverged { step: Option<usize>, gradient_norm: f64 },
}

/// Trajectory-level ridge fit of returns on stacked features.
#[derive(Debug, Clone)]
pub struct Redistribution {
    pub theta: Vec<f64>,
    pub system: RidgeSystem,
    pub dim: usize,
    pub horizon: usize,
}

impl Redistribution {
    pub fn step_weights(&self, step: usize) -> &[f64] {
        &self.theta[step * self.dim..(step + 1) * self.dim]
    }

    /// `R̂_h(s,a) = ⟨φ(s,a), θ̂_h⟩`, unclipped.
    pub fn proxy_reward(&self, features: &FeatureMap) -> QTable {
        (0..self.horizon)
            .map(|h| linear_table(features, self.step_weights(h)))
            .collect()
    }

    /// `b_{r,h}(s,a) = ‖Φ_h(s,a)‖_{Σ⁻¹}`.
    pub fn bonus(&self, features: &FeatureMap) -> QTable {
        (0..self.horizon)
            .map(|h| {
                table_from_fn(features, |s, a| {
                    self.system.bonus(&features.one_block_hot(self.horizon, h, s, a))
                })
            })
            .collect()
    }

    pub fn channel(&self, features: &FeatureMap) -> RewardChannel {
        RewardChannel {
            weights: (0..self.horizon).map(|h| self.step_weights(h).to_vec()).collect(),
            proxy: self.proxy_reward(features),
            bonus: self.bonus(features),
        }
    }
}

/// Per-step proxy rewards together with their uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardChannel {
    pub weights: Vec<Vec<f64>>,
    pub proxy: QTable,
    pub bonus: QTable,
}

pub(crate) fn table_from_fn(features: &FeatureMap, mut f: impl FnMut(usize, usize) -> f64) -> Vec<Vec<f64>> {
    (0..features.num_states())
        .map(|s| (0..features.num_actions()).map(|a| f(s, a)).collect())
        .collect()
}

pub(crate) fn linear_table(features: &FeatureMap, weights: &[f64]) -> Vec<Vec<f64>> {
    table_from_fn(features, |s, a| dot(features.feature(s, a), weights))
}

pub fn redistribute_rewards_linear(
    dataset: &OfflineDataset,
    features: &FeatureMap,
    lambda1: f64,
) -> Result<Redistribution> {
    dataset.ensure_matches(features)?;
    let horizon = dataset.horizon();
    let stacked: Vec<Vec<f64>> = dataset.records().iter().map(|r| features.trajectory_feature(r)).collect();
    let returns: Vec<f64> = dataset.records().iter().map(|r| r.ret()).collect();
    let (system, theta) = ridge_fit(features.dim() * horizon, &stacked, &returns, lambda1)?;
    Ok(Redistribution {
        theta,
        system,
        dim: features.dim(),
        horizon,
    })
}

/// Ridge regression of `V_next(s_{h+1})` on `φ(x_h)`.
pub fn fit_transition_value_linear(
    dataset: &OfflineDataset,
    features: &FeatureMap,
    v_next: &[f64],
    lambda2: f64,
    step: usize,
) -> Result<(Vec<f64>, RidgeSystem)> {
    step_ridge(dataset, features, lambda2, step, |rec| v_next[rec.next_state(step)])
}

pub(crate) fn step_ridge(
    dataset: &OfflineDataset,
    features: &FeatureMap,
    reg: f64,
    step: usize,
    mut target: impl FnMut(&crate::dataset::TrajectoryRecord) -> f64,
) -> Result<(Vec<f64>, RidgeSystem)> {
    let mut vectors = Vec::with_capacity(dataset.len());
    let mut targets = Vec::with_capacity(dataset.len());
    for rec in dataset.records() {
        let (s, a) = rec.pair(step);
        vectors.push(features.feature(s, a));
        targets.push(target(rec));
    }
    let (system, weights) = ridge_fit(features.dim(), &vectors, &targets, reg)?;
    Ok((weights, system))
}

/// Reward and value bonus tables for every step.
pub fn penalties_linear(
    redistribution: &Redistribution,
    value_systems: &[RidgeSystem],
    features: &FeatureMap,
) -> (QTable, QTable) {
    let b_r = redistribution.bonus(features);
    let b_v = value_systems
        .iter()
        .map(|sys| table_from_fn(features, |s, a| sys.bonus(features.feature(s, a))))
        .collect();
    (b_r, b_v)
}

#[derive(Debug, Clone)]
pub struct LinearPartedSolution {
    pub solver: SolverKind,
    /// Per-step reward weights; for PARTED these are the slices of `Θ̂`.
    pub reward_weights: Vec<Vec<f64>>,
    /// `Σ`, present only when rewards were redistributed.
    pub reward_system: Option<RidgeSystem>,
    pub transition_weights: Vec<Vec<f64>>,
    pub value_systems: Vec<RidgeSystem>,
    pub estimate: ValueEstimate,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCheck {
    pub theta_norm: f64,
    pub theta_bound: f64,
    pub transition_norms: Vec<f64>,
    pub transition_bound: f64,
    pub holds: bool,
}

impl LinearPartedSolution {
    /// `Θ̂` as one `dH` vector.
    pub fn theta(&self) -> Vec<f64> {
        self.reward_weights.concat()
    }

    /// `‖Θ̂‖ ≤ H√(dHN/λ₁)` and `‖ŵ_h‖ ≤ H√(dN/λ₂)`.
    pub fn scale_check(&self, n: usize, lambda1: f64, lambda2: f64) -> ScaleCheck {
        let h = self.estimate.horizon() as f64;
        let d = self.transition_weights.first().map_or(0, Vec::len) as f64;
        let n = n as f64;
        let theta_norm = norm(&self.theta());
        let theta_bound = h * libm::sqrt(d * h * n / lambda1);
        let transition_norms: Vec<f64> = self.transition_weights.iter().map(|w| norm(w)).collect();
        let transition_bound = h * libm::sqrt(d * n / lambda2);
        let holds = theta_norm <= theta_bound * (1.0 + 1e-12)
            && transition_norms.iter().all(|&x| x <= transition_bound * (1.0 + 1e-12));
        ScaleCheck {
            theta_norm,
            theta_bound,
            transition_norms,
            transition_bound,
            holds,
        }
    }
}

/// Backward pass given any reward channel. Every linear solver ends here.
pub fn solve_with_reward_channel(
    dataset: &OfflineDataset,
    features: &FeatureMap,
    channel: &RewardChannel,
    lambda2: f64,
    beta1: f64,
    beta2: f64,
    clip: ClipMode,
) -> Result<(Vec<Vec<f64>>, Vec<RidgeSystem>, ValueEstimate)> {
    dataset.ensure_matches(features)?;
    let horizon = dataset.horizon();
    let mut estimate = ValueEstimate::new(
        horizon,
        features.num_states(),
        features.num_actions(),
        beta1,
        beta2,
        clip,
    );
    let mut weights = vec![Vec::new(); horizon];
    let mut systems = Vec::with_capacity(horizon);
    for h in (0..horizon).rev() {
        let (w, sys) = fit_transition_value_linear(dataset, features, &estimate.v[h + 1], lambda2, h)?;
        let transition = linear_table(features, &w);
        let value_bonus = table_from_fn(features, |s, a| sys.bonus(features.feature(s, a)));
        estimate.set_step(
            h,
            channel.proxy[h].clone(),
            transition,
            channel.bonus[h].clone(),
            value_bonus,
        );
        weights[h] = w;
        systems.push(sys);
    }
    systems.reverse();
    Ok((weights, systems, estimate))
}

pub(crate) fn size_warnings(n: usize, dim: usize, warnings: &mut Vec<Warning>) {
    if n < dim {
        warnings.push(Warning::FewTrajectories { n, dim });
    }
}

pub fn solve_linear_parted(
    dataset: &OfflineDataset,
    features: &FeatureMap,
    config: &LinearPartedConfig,
) -> Result<LinearPartedSolution> {
    let mut warnings = config.validate()?;
    size_warnings(dataset.len(), features.dim(), &mut warnings);
    let (beta1, beta2) = config.beta.resolve(features.dim(), dataset.horizon(), dataset.len())?;
    let redistribution = redistribute_rewards_linear(dataset, features, config.lambda1)?;
    let channel = redistribution.channel(features);
    let (transition_weights, value_systems, estimate) = solve_with_reward_channel(
        dataset,
        features,
        &channel,
        config.lambda2,
        beta1,
        beta2,
        config.clip,
    )?;
    Ok(LinearPartedSolution {
        solver: SolverKind::PartedLinear,
        reward_weights: channel.weights,
        reward_system: Some(redistribution.system),
        transition_weights,
        value_systems,
        estimate,
        warnings,
    })
}

/// Step-wise values of the greedy policy's `V̂`, for callers needing only `V̂`.
pub fn value_table(solution: &LinearPartedSolution) -> &VTable {
    &solution.estimate.v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{collect, BehaviorPolicy, DatasetHeader, TrajectoryRecord};
    use crate::linalg::kernel_bonus_identity_check;
    use crate::mdp::{exact_optimal_values, generate_random_mdp, LinearMdp, RandomMdpSpec, RewardNoise};
    use crate::testing::dense_inverse;
    use nalgebra::{DMatrix, DVector};

    fn scalar_dataset(horizon: usize, returns: &[f64]) -> (OfflineDataset, FeatureMap) {
        let records = returns
            .iter()
            .map(|&r| TrajectoryRecord::new(vec![0; horizon + 1], vec![0; horizon], r))
            .collect();
        let header = DatasetHeader {
            d: 1,
            horizon,
            num_states: 1,
            num_actions: 1,
            n: returns.len(),
            seed: 0,
            policy: BehaviorPolicy::Uniform,
        };
        let data = OfflineDataset::new(header, records).unwrap();
        (data, FeatureMap::from_fn(1, 1, 1, |_, _| vec![1.0]))
    }

    fn noiseless(spec: RandomMdpSpec) -> LinearMdp {
        RandomMdpSpec {
            reward_noise: RewardNoise::None,
            ..spec
        }
        .generate()
        .unwrap()
    }

    #[test]
    fn two_step_scalar_redistribution() {
        for n in [1usize, 3, 10] {
            let (data, map) = scalar_dataset(2, &vec![1.0; n]);
            let red = redistribute_rewards_linear(&data, &map, 1.0).unwrap();
            let expected = n as f64 / (2.0 * n as f64 + 1.0);
            assert!((red.theta[0] - expected).abs() < 1e-14);
            assert!((red.theta[1] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn single_step_is_plain_ridge() {
        let mdp = generate_random_mdp(4, 5, 3, 1, 4, 1.0).unwrap();
        let map = mdp.feature_map();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 40, 1, false).unwrap();
        let red = redistribute_rewards_linear(&data, &map, 1.0).unwrap();
        let vectors: Vec<&[f64]> = data.records().iter().map(|r| map.feature(r.pair(0).0, r.pair(0).1)).collect();
        let targets: Vec<f64> = data.records().iter().map(|r| r.ret()).collect();
        let (_, w) = ridge_fit(4, &vectors, &targets, 1.0).unwrap();
        assert_eq!(red.theta, w);
    }

    #[test]
    fn zero_returns_give_zero_rewards() {
        let mdp = generate_random_mdp(4, 5, 3, 3, 4, 1.0).unwrap();
        let map = mdp.feature_map();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 30, 1, false).unwrap();
        let zeroed: Vec<TrajectoryRecord> = data
            .records()
            .iter()
            .map(|r| TrajectoryRecord::new(r.states().to_vec(), r.actions().to_vec(), 0.0))
            .collect();
        let data = OfflineDataset::new(data.header().clone(), zeroed).unwrap();
        let red = redistribute_rewards_linear(&data, &map, 1.0).unwrap();
        assert!(red.theta.iter().all(|&x| x == 0.0));
        assert!(red.proxy_reward(&map).iter().flatten().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn transition_value_scalar_cases() {
        let (data, map) = scalar_dataset(2, &[0.0; 7]);
        let (w, _) = fit_transition_value_linear(&data, &map, &[0.0], 1.0, 0).unwrap();
        assert_eq!(w, vec![0.0]);
        let (w, _) = fit_transition_value_linear(&data, &map, &[1.3], 1.0, 0).unwrap();
        assert!((w[0] - 7.0 * 1.3 / 8.0).abs() < 1e-14);
    }

    #[test]
    fn transition_value_matches_dense_solve() {
        let mdp = generate_random_mdp(11, 6, 3, 4, 5, 1.0).unwrap();
        let map = mdp.feature_map();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 60, 2, false).unwrap();
        let v_next: Vec<f64> = (0..6).map(|s| s as f64 * 0.4).collect();
        let (w, _) = fit_transition_value_linear(&data, &map, &v_next, 1.5, 2).unwrap();
        let mut a = DMatrix::<f64>::identity(5, 5) * 1.5;
        let mut b = DVector::<f64>::zeros(5);
        for rec in data.records() {
            let (s, act) = rec.pair(2);
            let phi = DVector::from_column_slice(map.feature(s, act));
            a += &phi * phi.transpose();
            b += &phi * v_next[rec.next_state(2)];
        }
        let expected = dense_inverse(&a) * b;
        for i in 0..5 {
            assert!((w[i] - expected[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn penalties_on_empty_systems_equal_feature_norm() {
        let map = FeatureMap::from_fn(2, 2, 2, |s, a| {
            let t = (s * 2 + a) as f64 * 0.4;
            vec![libm::cos(t), libm::sin(t)]
        });
        let red = Redistribution {
            theta: vec![0.0; 6],
            system: RidgeSystem::empty(6, 1.0).unwrap(),
            dim: 2,
            horizon: 3,
        };
        let systems = vec![RidgeSystem::empty(2, 1.0).unwrap(); 3];
        let (b_r, b_v) = penalties_linear(&red, &systems, &map);
        for x in b_r.iter().chain(&b_v).flatten().flatten() {
            assert!((x - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reward_bonus_matches_dual_form() {
        let mdp = generate_random_mdp(5, 6, 3, 3, 4, 1.0).unwrap();
        let map = mdp.feature_map();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 25, 3, false).unwrap();
        let lambda1 = 1.3;
        let red = redistribute_rewards_linear(&data, &map, lambda1).unwrap();
        let b_r = red.bonus(&map);
        let stacked: Vec<Vec<f64>> = data.records().iter().map(|r| map.trajectory_feature(r)).collect();
        for h in 0..3 {
            for s in 0..6 {
                for a in 0..3 {
                    let q = map.one_block_hot(3, h, s, a);
                    let (lhs, rhs) = kernel_bonus_identity_check(12, &stacked, lambda1, &q).unwrap();
                    assert!((lhs - rhs).abs() < 1e-9);
                    assert!((b_r[h][s][a] * b_r[h][s][a] - rhs).abs() < 1e-9);
                    assert!(b_r[h][s][a] <= norm(map.feature(s, a)) / libm::sqrt(lambda1) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn unpenalized_solver_approaches_optimum() {
        let mdp = noiseless(RandomMdpSpec {
            seed: 17,
            num_states: 4,
            num_actions: 2,
            horizon: 3,
            feature_dim: 3,
            ..RandomMdpSpec::default()
        });
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 5000, 3, false).unwrap();
        let sol = solve_linear_parted(&data, &mdp.feature_map(), &LinearPartedConfig::explicit(0.0, 0.0)).unwrap();
        let opt = exact_optimal_values(&mdp);
        let s1 = mdp.initial_state;
        assert!((sol.estimate.v[0][s1] - opt.v[0][s1]).abs() < 0.1);
    }

    #[test]
    fn huge_beta_zeroes_everything() {
        let mdp = generate_random_mdp(2, 5, 3, 3, 4, 1.0).unwrap();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 50, 0, false).unwrap();
        let big = 3.0 * libm::sqrt(50.0) * 10.0;
        let sol = solve_linear_parted(&data, &mdp.feature_map(), &LinearPartedConfig::explicit(big, big)).unwrap();
        assert!(sol.estimate.q.iter().flatten().flatten().all(|&x| x == 0.0));
        assert!(sol.estimate.v.iter().flatten().all(|&x| x == 0.0));
        assert!(sol.estimate.policy.iter().flatten().all(|&a| a == 0));
    }

    #[test]
    fn clip_modes_agree_at_unit_horizon() {
        let mdp = generate_random_mdp(2, 5, 3, 1, 4, 1.0).unwrap();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 50, 0, false).unwrap();
        let mut cfg = LinearPartedConfig::explicit(0.3, 0.3);
        let a = solve_linear_parted(&data, &mdp.feature_map(), &cfg).unwrap();
        cfg.clip = ClipMode::Flat;
        let b = solve_linear_parted(&data, &mdp.feature_map(), &cfg).unwrap();
        assert_eq!(a.estimate.q, b.estimate.q);
    }

    #[test]
    fn solution_invariants() {
        let mdp = generate_random_mdp(9, 6, 3, 4, 5, 1.0).unwrap();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 120, 4, false).unwrap();
        let cfg = LinearPartedConfig::default();
        let sol = solve_linear_parted(&data, &mdp.feature_map(), &cfg).unwrap();
        let est = &sol.estimate;
        for h in 0..4 {
            for s in 0..6 {
                for a in 0..3 {
                    assert!(est.q[h][s][a] >= 0.0 && est.q[h][s][a] <= (4 - h) as f64);
                    let g = est.beta1 * est.reward_bonus[h][s][a] + est.beta2 * est.value_bonus[h][s][a];
                    assert_eq!(est.penalty[h][s][a], g);
                }
                let max = est.q[h][s].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                assert_eq!(est.v[h][s], max);
            }
        }
        assert!(est.v[4].iter().all(|&x| x == 0.0));
        assert!(sol.scale_check(120, 1.0, 1.0).holds);
    }

    #[test]
    fn few_trajectories_warn() {
        let mdp = generate_random_mdp(9, 6, 3, 2, 5, 1.0).unwrap();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 3, 4, false).unwrap();
        let mut cfg = LinearPartedConfig::default();
        cfg.lambda1 = 0.5;
        let sol = solve_linear_parted(&data, &mdp.feature_map(), &cfg).unwrap();
        assert!(sol.warnings.contains(&Warning::FewTrajectories { n: 3, dim: 5 }));
        assert!(matches!(sol.warnings[0], Warning::SmallRegularization { .. }));
    }

    #[test]
    fn theorem2_formula_values() {
        let (b1, b2) = theorem2_betas(1.0, 1.0, 0.1, 2, 3, 100);
        let e1 = 3.0 * libm::sqrt(6.0 * libm::log(1000.0));
        let e2 = 2.0 * 9.0 * libm::sqrt(libm::log(2.0 * 27.0 * libm::pow(100.0, 2.5) / 0.1));
        assert!((b1 - e1).abs() < 1e-12 * e1);
        assert!((b2 - e2).abs() < 1e-12 * e2);
        assert!(LinearBeta::Theorem2 { c_beta1: 0.1, c_beta2: 0.1, delta: 1.5 }.resolve(2, 3, 10).is_err());
        assert!(LinearBeta::Explicit { beta1: -1.0, beta2: 0.0 }.resolve(2, 3, 10).is_err());
    }

    #[test]
    fn solver_tags_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(SolverKind::from_tag(k.tag()), Some(k));
            assert_eq!(SolverKind::ALL[k.index()], k);
        }
        assert!(SolverKind::ALL.windows(2).all(|w| w[0] < w[1] && w[0].tag() < w[1].tag()));
        assert_eq!(SolverKind::from_tag("nope"), None);
    }
}
