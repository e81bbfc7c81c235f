//! Offline datasets carrying trajectory-level returns only.
//!
//! A record stores `H + 1` states (the final state is needed by the
//! transition-value regression at the last step), `H` actions and the summed
//! return. Per-step rewards are kept only when collection is asked to record
//! them, and no learner reads them; they exist for the oracle baseline and for
//! debugging.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{design_matrix, lambda_min};
use crate::mdp::{exact_optimal_values, LinearMdp, Policy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    states: Vec<usize>,
    actions: Vec<usize>,
    ret: f64,
    #[serde(default, rename = "step_rewards", skip_serializing_if = "Option::is_none")]
    hidden_step_rewards: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    /// `states` has one more entry than `actions`.
    pub fn new(states: Vec<usize>, actions: Vec<usize>, ret: f64) -> Self {
        assert_eq!(states.len(), actions.len() + 1, "states must include s_(H+1)");
        Self {
            states,
            actions,
            ret,
            hidden_step_rewards: None,
        }
    }

    /// A record whose return is the sum of `step_rewards`, which are retained.
    pub fn with_step_rewards(states: Vec<usize>, actions: Vec<usize>, step_rewards: Vec<f64>) -> Self {
        assert_eq!(step_rewards.len(), actions.len(), "one reward per step");
        let ret = step_rewards.iter().sum();
        Self {
            hidden_step_rewards: Some(step_rewards),
            ..Self::new(states, actions, ret)
        }
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    /// The trajectory return `r(τ)`.
    pub fn ret(&self) -> f64 {
        self.ret
    }

    /// `(s_h, a_h)`.
    pub fn pair(&self, step: usize) -> (usize, usize) {
        (self.states[step], self.actions[step])
    }

    /// `s_{h+1}`.
    pub fn next_state(&self, step: usize) -> usize {
        self.states[step + 1]
    }

    pub fn hidden_step_rewards(&self) -> Option<&[f64]> {
        self.hidden_step_rewards.as_deref()
    }

    pub fn without_step_rewards(mut self) -> Self {
        self.hidden_step_rewards = None;
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BehaviorPolicy {
    #[default]
    Uniform,
    /// Takes the optimal action with probability `1 − ε` and a uniform action otherwise.
    EpsilonGreedy { epsilon: f64 },
    Explicit { policy: Policy },
}

impl BehaviorPolicy {
    pub fn resolve(&self, mdp: &LinearMdp) -> Result<Policy> {
        let (h, s, a) = (mdp.horizon, mdp.num_states, mdp.num_actions);
        let policy = match self {
            BehaviorPolicy::Uniform => Policy::uniform(h, s, a),
            BehaviorPolicy::EpsilonGreedy { epsilon } => {
                if !(0.0..=1.0).contains(epsilon) {
                    return Err(Error::InvalidParameter {
                        name: "epsilon",
                        reason: format!("{epsilon} is outside [0, 1]"),
                    });
                }
                let optimal = exact_optimal_values(mdp).policy;
                let table = (0..h)
                    .map(|step| {
                        (0..s)
                            .map(|state| {
                                (0..a)
                                    .map(|action| {
                                        epsilon / a as f64
                                            + (1.0 - epsilon) * optimal.prob(step, state, action)
                                    })
                                    .collect()
                            })
                            .collect()
                    })
                    .collect();
                Policy::Stochastic(table)
            }
            BehaviorPolicy::Explicit { policy } => policy.clone(),
        };
        policy.check(h, s, a)?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub d: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub policy: BehaviorPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    header: DatasetHeader,
    records: Vec<TrajectoryRecord>,
}

impl OfflineDataset {
    pub fn new(header: DatasetHeader, records: Vec<TrajectoryRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if header.n != records.len() {
            return Err(Error::DimensionMismatch {
                expected: header.n,
                found: records.len(),
            });
        }
        for (i, rec) in records.iter().enumerate() {
            let bad = rec.actions.len() != header.horizon
                || rec.states.len() != header.horizon + 1
                || rec.states.iter().any(|&s| s >= header.num_states)
                || rec.actions.iter().any(|&a| a >= header.num_actions)
                || !rec.ret.is_finite()
                || rec
                    .hidden_step_rewards
                    .as_ref()
                    .is_some_and(|r| r.len() != header.horizon);
            if bad {
                return Err(Error::InvalidDimensions(format!("record {i} does not match header")));
            }
        }
        Ok(Self { header, records })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.header.horizon
    }

    pub fn has_step_rewards(&self) -> bool {
        self.records.iter().all(|r| r.hidden_step_rewards.is_some())
    }

    /// The first `n` trajectories. Collection draws trajectories from one
    /// sequential stream, so this equals collecting `n` with the same seed.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let records = self.records[..n.min(self.len())].to_vec();
        Self::new(
            DatasetHeader {
                n: records.len(),
                ..self.header.clone()
            },
            records,
        )
    }

    pub fn ensure_matches(&self, features: &FeatureMap) -> Result<()> {
        if features.num_states() != self.header.num_states
            || features.num_actions() != self.header.num_actions
        {
            return Err(Error::InvalidDimensions(format!(
                "feature map covers {}x{} pairs but dataset has S={}, A={}",
                features.num_states(),
                features.num_actions(),
                self.header.num_states,
                self.header.num_actions
            )));
        }
        Ok(())
    }
}

/// Rolls out `n` trajectories of `behavior` from the initial state.
pub fn collect(
    mdp: &LinearMdp,
    behavior: &BehaviorPolicy,
    n: usize,
    seed: u64,
    record_step_rewards: bool,
) -> Result<OfflineDataset> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    mdp.check_shape()?;
    let policy = behavior.resolve(mdp)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = mdp.horizon;
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let mut states = Vec::with_capacity(horizon + 1);
        let mut actions = Vec::with_capacity(horizon);
        let mut rewards = Vec::with_capacity(horizon);
        let mut state = mdp.initial_state;
        states.push(state);
        for h in 0..horizon {
            let action = policy.sample(h, state, &mut rng);
            rewards.push(mdp.sample_reward(h, state, action, &mut rng));
            state = crate::mdp::transition(mdp, h, state, action, &mut rng);
            actions.push(action);
            states.push(state);
        }
        let record = TrajectoryRecord::with_step_rewards(states, actions, rewards);
        records.push(if record_step_rewards {
            record
        } else {
            record.without_step_rewards()
        });
    }
    OfflineDataset::new(
        DatasetHeader {
            d: mdp.feature_dim,
            horizon,
            num_states: mdp.num_states,
            num_actions: mdp.num_actions,
            n,
            seed,
            policy: behavior.clone(),
        },
        records,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// `λ_min((1/N) Σ_τ Φ(τ)Φ(τ)ᵀ)`.
    pub trajectory_lambda_min: f64,
    /// `λ_min((1/N) Σ_τ φ(x_h)φ(x_h)ᵀ)` for each step.
    pub step_lambda_min: Vec<f64>,
    pub threshold: f64,
    pub well_explored: bool,
}

impl CoverageReport {
    pub fn min_step_lambda(&self) -> f64 {
        self.step_lambda_min.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn normalized_second_moment(dim: usize, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let design = design_matrix(dim, rows)?;
    Ok(design.tr_mul(&design) / rows.len() as f64)
}

/// Empirical coverage of the trajectory and per-step feature spaces.
pub fn coverage_diagnostics(
    features: &FeatureMap,
    dataset: &OfflineDataset,
    threshold: f64,
) -> Result<CoverageReport> {
    dataset.ensure_matches(features)?;
    let horizon = dataset.horizon();
    let dim = features.dim();
    let trajectories: Vec<Vec<f64>> = dataset
        .records()
        .iter()
        .map(|r| features.trajectory_feature(r))
        .collect();
    let trajectory_lambda_min = lambda_min(&normalized_second_moment(dim * horizon, &trajectories)?);
    let mut step_lambda_min = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let rows: Vec<Vec<f64>> = dataset
            .records()
            .iter()
            .map(|r| {
                let (s, a) = r.pair(h);
                features.feature(s, a).to_vec()
            })
            .collect();
        step_lambda_min.push(lambda_min(&normalized_second_moment(dim, &rows)?));
    }
    let well_explored = trajectory_lambda_min > threshold && step_lambda_min.iter().all(|&l| l > threshold);
    Ok(CoverageReport {
        trajectory_lambda_min,
        step_lambda_min,
        threshold,
        well_explored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::mdp::{exact_policy_values, generate_random_mdp, RewardNoise};
    use alloc::vec;
    use rand::Rng;

    fn constant_mdp(horizon: usize) -> LinearMdp {
        LinearMdp {
            num_states: 2,
            num_actions: 1,
            horizon,
            feature_dim: 1,
            features: vec![vec![vec![1.0]]; 2],
            anchor_transitions: vec![vec![vec![0.5, 0.5]]; horizon],
            anchor_rewards: vec![vec![0.5]; horizon],
            reward_noise: RewardNoise::None,
            initial_state: 0,
        }
    }

    #[test]
    fn single_noiseless_trajectory() {
        let data = collect(&constant_mdp(4), &BehaviorPolicy::Uniform, 1, 3, false).unwrap();
        assert_eq!(data.records()[0].ret(), 2.0);
        assert_eq!(data.records()[0].states().len(), 5);
        assert!(data.records()[0].hidden_step_rewards().is_none());
    }

    #[test]
    fn collection_is_deterministic_and_prefix_consistent() {
        let mdp = generate_random_mdp(2, 5, 3, 4, 3, 1.0).unwrap();
        let a = collect(&mdp, &BehaviorPolicy::Uniform, 50, 9, true).unwrap();
        let b = collect(&mdp, &BehaviorPolicy::Uniform, 50, 9, true).unwrap();
        assert_eq!(a, b);
        let small = collect(&mdp, &BehaviorPolicy::Uniform, 20, 9, true).unwrap();
        assert_eq!(a.truncated(20).unwrap(), small);
    }

    #[test]
    fn returns_are_bounded_and_sum_step_rewards() {
        let mdp = generate_random_mdp(2, 5, 3, 4, 3, 1.0).unwrap();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 200, 1, true).unwrap();
        for r in data.records() {
            assert!((0.0..=4.0).contains(&r.ret()));
            let total: f64 = r.hidden_step_rewards().unwrap().iter().sum();
            assert!((total - r.ret()).abs() <= 1e-12);
        }
    }

    #[test]
    fn noiseless_returns_match_mean_rewards() {
        let mut mdp = generate_random_mdp(6, 4, 2, 3, 3, 1.0).unwrap();
        mdp.reward_noise = RewardNoise::None;
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 100, 2, false).unwrap();
        for r in data.records() {
            let expected: f64 = (0..3).map(|h| {
                let (s, a) = r.pair(h);
                mdp.mean_reward(h, s, a)
            }).sum();
            assert!((expected - r.ret()).abs() <= 1e-12);
        }
    }

    #[test]
    fn mean_return_matches_policy_value() {
        let mut mdp = generate_random_mdp(6, 4, 2, 3, 3, 1.0).unwrap();
        mdp.reward_noise = RewardNoise::None;
        let n = 1000;
        let data = collect(&mdp, &BehaviorPolicy::Uniform, n, 5, false).unwrap();
        let returns: Vec<f64> = data.records().iter().map(|r| r.ret()).collect();
        let mean = returns.iter().sum::<f64>() / n as f64;
        let var = returns.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
        let se = libm::sqrt(var / n as f64);
        let exact = exact_policy_values(&mdp, &Policy::uniform(3, 4, 2)).v[0][0];
        assert!((mean - exact).abs() <= 3.0 * se, "mean {mean} exact {exact} se {se}");
    }

    #[test]
    fn epsilon_greedy_resolves_to_distribution() {
        let mdp = generate_random_mdp(6, 4, 3, 3, 3, 1.0).unwrap();
        let policy = BehaviorPolicy::EpsilonGreedy { epsilon: 0.3 }.resolve(&mdp).unwrap();
        assert!(policy.check(3, 4, 3).is_ok());
        assert!(BehaviorPolicy::EpsilonGreedy { epsilon: 1.5 }.resolve(&mdp).is_err());
    }

    #[test]
    fn zero_trajectories_rejected() {
        assert_eq!(
            collect(&constant_mdp(2), &BehaviorPolicy::Uniform, 0, 0, false).unwrap_err(),
            Error::EmptyDataset
        );
    }

    #[test]
    fn block_inner_product_identity() {
        let mdp = generate_random_mdp(7, 5, 3, 4, 3, 1.0).unwrap();
        let map = mdp.feature_map();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 100, 4, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for rec in data.records() {
            let h = rng.random_range(0..4);
            let (s, a) = (rng.random_range(0..5), rng.random_range(0..3));
            let phi_tau = map.trajectory_feature(rec);
            let lhs = dot(&map.one_block_hot(4, h, s, a), &phi_tau);
            let (sh, ah) = rec.pair(h);
            let rhs = dot(map.feature(s, a), map.feature(sh, ah));
            assert!((lhs - rhs).abs() <= 1e-15);
            let norm_sq: f64 = (0..4).map(|k| {
                let (sk, ak) = rec.pair(k);
                dot(map.feature(sk, ak), map.feature(sk, ak))
            }).sum();
            assert!((dot(&phi_tau, &phi_tau) - norm_sq).abs() <= 1e-14);
        }
    }

    #[test]
    fn identical_trajectories_have_rank_deficient_steps() {
        let mdp = generate_random_mdp(7, 3, 2, 3, 3, 1.0).unwrap();
        let policy = BehaviorPolicy::Explicit { policy: Policy::constant(3, 3, 1) };
        let mut one = mdp.clone();
        for h in 0..3 {
            for j in 0..3 {
                one.anchor_transitions[h][j] = vec![0.0, 1.0, 0.0];
            }
        }
        let data = collect(&one, &policy, 30, 0, false).unwrap();
        let report = coverage_diagnostics(&one.feature_map(), &data, 1e-6).unwrap();
        for l in &report.step_lambda_min {
            assert!(l.abs() < 1e-12);
        }
        assert!(!report.well_explored);
    }

    #[test]
    fn scalar_features_have_unit_coverage() {
        let data = collect(&constant_mdp(3), &BehaviorPolicy::Uniform, 10, 0, false).unwrap();
        let report = coverage_diagnostics(&constant_mdp(3).feature_map(), &data, 0.5).unwrap();
        for l in report.step_lambda_min {
            assert!((l - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_behavior_covers_well_mixing_mdp() {
        let mdp = generate_random_mdp(3, 8, 4, 5, 6, 1.0).unwrap();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, 2000, 8, false).unwrap();
        let report = coverage_diagnostics(&mdp.feature_map(), &data, 1e-4).unwrap();
        // All trajectories share the initial state, so step 0 sees only A < d
        // distinct features.
        assert!(report.step_lambda_min[0].abs() < 1e-10, "{report:?}");
        for l in &report.step_lambda_min[1..] {
            assert!(*l > 1e-4, "{report:?}");
        }
        // Every block of a simplex feature sums to one, so block differences
        // lie in the null space of the trajectory second moment.
        assert!(report.trajectory_lambda_min.abs() < 1e-10, "{report:?}");
        assert!(!report.well_explored);
    }
}
