//! Finite-state episodic linear MDPs and exact dynamic-programming oracles.
//!
//! Instances are simplex mixtures: every feature vector `φ(s,a)` lies on the
//! probability simplex and each step carries `d` anchor distributions over
//! next states (rows of `μ_h`) plus anchor rewards `ρ_h ∈ [0,1]^d`. Then
//! `P_h(·|s,a) = Σ_j φ_j(s,a) μ_h[j]` is a distribution and
//! `R_h(s,a) = ⟨φ(s,a), ρ_h⟩ ∈ [0,1]`, so the linear structure holds exactly.
//!
//! Steps are indexed from 0. Value tables have `H + 1` rows, the last being
//! identically zero.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::dot;

/// `[h][s][a]`.
pub type QTable = Vec<Vec<Vec<f64>>>;
/// `[h][s]`.
pub type VTable = Vec<Vec<f64>>;

pub const VALIDATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardNoise {
    /// The observed reward is exactly `R_h(s,a)`.
    None,
    /// The observed reward is `Bernoulli(R_h(s,a))`.
    #[default]
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub feature_dim: usize,
    /// `features[s][a]` is `φ(s,a)`.
    pub features: Vec<Vec<Vec<f64>>>,
    /// `anchor_transitions[h][j]` is a distribution over next states.
    pub anchor_transitions: Vec<Vec<Vec<f64>>>,
    /// `anchor_rewards[h]` is `θ*_h`.
    pub anchor_rewards: Vec<Vec<f64>>,
    pub reward_noise: RewardNoise,
    pub initial_state: usize,
}

impl LinearMdp {
    pub fn check_shape(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDimensions(msg));
        let (s, a, h, d) = (self.num_states, self.num_actions, self.horizon, self.feature_dim);
        if s == 0 || a == 0 || h == 0 || d == 0 {
            return bad(format!("S={s}, A={a}, H={h}, d={d} must all be positive"));
        }
        if self.initial_state >= s {
            return bad(format!("initial state {} out of range", self.initial_state));
        }
        if self.features.len() != s
            || self
                .features
                .iter()
                .any(|row| row.len() != a || row.iter().any(|phi| phi.len() != d))
        {
            return bad(format!("features must be {s}x{a}x{d}"));
        }
        if self.anchor_transitions.len() != h
            || self
                .anchor_transitions
                .iter()
                .any(|mu| mu.len() != d || mu.iter().any(|row| row.len() != s))
        {
            return bad(format!("anchor transitions must be {h}x{d}x{s}"));
        }
        if self.anchor_rewards.len() != h || self.anchor_rewards.iter().any(|r| r.len() != d) {
            return bad(format!("anchor rewards must be {h}x{d}"));
        }
        Ok(())
    }

    pub fn feature(&self, state: usize, action: usize) -> &[f64] {
        &self.features[state][action]
    }

    pub fn feature_map(&self) -> FeatureMap {
        FeatureMap::from_fn(self.feature_dim, self.num_states, self.num_actions, |s, a| {
            self.features[s][a].clone()
        })
    }

    /// `P_h(·|s,a)`.
    pub fn transition_probs(&self, step: usize, state: usize, action: usize) -> Vec<f64> {
        let phi = self.feature(state, action);
        let mut probs = vec![0.0; self.num_states];
        for (weight, anchor) in phi.iter().zip(&self.anchor_transitions[step]) {
            for (p, &m) in probs.iter_mut().zip(anchor) {
                *p += weight * m;
            }
        }
        probs
    }

    /// `R_h(s,a)`.
    pub fn mean_reward(&self, step: usize, state: usize, action: usize) -> f64 {
        dot(self.feature(state, action), &self.anchor_rewards[step])
    }

    /// `R_h` as an `S×A` table.
    pub fn reward_table(&self, step: usize) -> Vec<Vec<f64>> {
        (0..self.num_states)
            .map(|s| (0..self.num_actions).map(|a| self.mean_reward(step, s, a)).collect())
            .collect()
    }

    pub fn sample_reward<R: Rng + ?Sized>(
        &self,
        step: usize,
        state: usize,
        action: usize,
        rng: &mut R,
    ) -> f64 {
        let mean = self.mean_reward(step, state, action);
        match self.reward_noise {
            RewardNoise::None => mean,
            RewardNoise::Bernoulli => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    // Rounding left the total just under u: take the last outcome with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Draws `s' ~ P_h(·|s,a)`.
pub fn transition<R: Rng + ?Sized>(
    mdp: &LinearMdp,
    step: usize,
    state: usize,
    action: usize,
    rng: &mut R,
) -> usize {
    sample_categorical(&mdp.transition_probs(step, state, action), rng)
}

fn distribution_violation(probs: &[f64]) -> f64 {
    let total: f64 = probs.iter().sum();
    let negative = probs.iter().fold(0.0_f64, |m, &p| m.max(-p));
    (total - 1.0).abs().max(negative)
}

/// Largest violation of each structural invariant; zero means exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub shape_error: Option<String>,
    pub feature_simplex: f64,
    pub feature_norm: f64,
    pub anchor_rows: f64,
    pub transition_rows: f64,
    pub reward_range: f64,
    pub reward_weight_norm: f64,
    pub passed: bool,
}

impl ValidationReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.feature_simplex,
            self.feature_norm,
            self.anchor_rows,
            self.transition_rows,
            self.reward_range,
            self.reward_weight_norm,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn validate_mdp(mdp: &LinearMdp) -> ValidationReport {
    if let Err(err) = mdp.check_shape() {
        return ValidationReport {
            shape_error: Some(format!("{err}")),
            feature_simplex: f64::INFINITY,
            feature_norm: f64::INFINITY,
            anchor_rows: f64::INFINITY,
            transition_rows: f64::INFINITY,
            reward_range: f64::INFINITY,
            reward_weight_norm: f64::INFINITY,
            passed: false,
        };
    }
    let mut feature_simplex = 0.0_f64;
    let mut feature_norm = 0.0_f64;
    for row in &mdp.features {
        for phi in row {
            feature_simplex = feature_simplex.max(distribution_violation(phi));
            feature_norm = feature_norm.max(libm::sqrt(dot(phi, phi)) - 1.0);
        }
    }
    let mut anchor_rows = 0.0_f64;
    for mu in &mdp.anchor_transitions {
        for row in mu {
            anchor_rows = anchor_rows.max(distribution_violation(row));
        }
    }
    let mut transition_rows = 0.0_f64;
    let mut reward_range = 0.0_f64;
    let mut reward_weight_norm = 0.0_f64;
    let bound = libm::sqrt(mdp.feature_dim as f64);
    for h in 0..mdp.horizon {
        let rho = &mdp.anchor_rewards[h];
        for &r in rho {
            reward_range = reward_range.max(-r).max(r - 1.0);
        }
        reward_weight_norm = reward_weight_norm.max(libm::sqrt(dot(rho, rho)) - bound);
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                transition_rows =
                    transition_rows.max(distribution_violation(&mdp.transition_probs(h, s, a)));
                let r = mdp.mean_reward(h, s, a);
                reward_range = reward_range.max(-r).max(r - 1.0);
            }
        }
    }
    let mut report = ValidationReport {
        shape_error: None,
        feature_simplex,
        feature_norm: feature_norm.max(0.0),
        anchor_rows,
        transition_rows,
        reward_range: reward_range.max(0.0),
        reward_weight_norm: reward_weight_norm.max(0.0),
        passed: false,
    };
    report.passed = report.max_violation() <= VALIDATION_TOLERANCE;
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomMdpSpec {
    pub seed: u64,
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub feature_dim: usize,
    pub reward_heterogeneity: f64,
    pub reward_noise: RewardNoise,
}

impl Default for RandomMdpSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            num_states: 8,
            num_actions: 4,
            horizon: 5,
            feature_dim: 6,
            reward_heterogeneity: 1.0,
            reward_noise: RewardNoise::Bernoulli,
        }
    }
}

/// A positive random vector normalized onto the simplex (Dirichlet(1,…,1)).
fn random_simplex<R: Rng>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len)
        .map(|_| -libm::log(1.0 - rng.random::<f64>()))
        .collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v.iter_mut().for_each(|x| *x = 1.0 / len as f64);
    }
    v
}

impl RandomMdpSpec {
    pub fn generate(&self) -> Result<LinearMdp> {
        let (s, a, h, d) = (self.num_states, self.num_actions, self.horizon, self.feature_dim);
        if s == 0 || a == 0 || h == 0 || d == 0 {
            return Err(Error::InvalidDimensions(format!(
                "S={s}, A={a}, H={h}, d={d} must all be positive"
            )));
        }
        let het = self.reward_heterogeneity;
        if !(0.0..=1.0).contains(&het) {
            return Err(Error::InvalidParameter {
                name: "reward_heterogeneity",
                reason: format!("{het} is outside [0, 1]"),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let features = (0..s)
            .map(|_| (0..a).map(|_| random_simplex(&mut rng, d)).collect())
            .collect();
        let mut anchor_transitions = Vec::with_capacity(h);
        let mut anchor_rewards = Vec::with_capacity(h);
        for _ in 0..h {
            anchor_transitions.push((0..d).map(|_| random_simplex(&mut rng, s)).collect());
            anchor_rewards.push(
                (0..d)
                    .map(|_| het * rng.random::<f64>() + (1.0 - het) * 0.5)
                    .collect(),
            );
        }
        Ok(LinearMdp {
            num_states: s,
            num_actions: a,
            horizon: h,
            feature_dim: d,
            features,
            anchor_transitions,
            anchor_rewards,
            reward_noise: self.reward_noise,
            initial_state: 0,
        })
    }
}

pub fn generate_random_mdp(
    seed: u64,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    feature_dim: usize,
    reward_heterogeneity: f64,
) -> Result<LinearMdp> {
    RandomMdpSpec {
        seed,
        num_states,
        num_actions,
        horizon,
        feature_dim,
        reward_heterogeneity,
        ..RandomMdpSpec::default()
    }
    .generate()
}

/// A Markov policy, either deterministic (`[h][s] -> a`) or stochastic
/// (`[h][s][a] -> prob`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Deterministic(Vec<Vec<usize>>),
    Stochastic(Vec<Vec<Vec<f64>>>),
}

impl Policy {
    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Policy::Stochastic(vec![
            vec![vec![1.0 / num_actions as f64; num_actions]; num_states];
            horizon
        ])
    }

    pub fn constant(horizon: usize, num_states: usize, action: usize) -> Self {
        Policy::Deterministic(vec![vec![action; num_states]; horizon])
    }

    pub fn horizon(&self) -> usize {
        match self {
            Policy::Deterministic(t) => t.len(),
            Policy::Stochastic(t) => t.len(),
        }
    }

    pub fn prob(&self, step: usize, state: usize, action: usize) -> f64 {
        match self {
            Policy::Deterministic(t) => f64::from(u8::from(t[step][state] == action)),
            Policy::Stochastic(t) => t[step][state][action],
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, step: usize, state: usize, rng: &mut R) -> usize {
        match self {
            Policy::Deterministic(t) => t[step][state],
            Policy::Stochastic(t) => sample_categorical(&t[step][state], rng),
        }
    }

    pub fn check(&self, horizon: usize, num_states: usize, num_actions: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidPolicy(msg));
        if self.horizon() != horizon {
            return bad(format!("horizon {} != {horizon}", self.horizon()));
        }
        match self {
            Policy::Deterministic(t) => {
                for (h, row) in t.iter().enumerate() {
                    if row.len() != num_states {
                        return bad(format!("step {h} has {} states", row.len()));
                    }
                    if let Some(&a) = row.iter().find(|&&a| a >= num_actions) {
                        return bad(format!("action {a} out of range at step {h}"));
                    }
                }
            }
            Policy::Stochastic(t) => {
                for (h, rows) in t.iter().enumerate() {
                    if rows.len() != num_states {
                        return bad(format!("step {h} has {} states", rows.len()));
                    }
                    for (s, probs) in rows.iter().enumerate() {
                        if probs.len() != num_actions {
                            return bad(format!("row ({h},{s}) has {} actions", probs.len()));
                        }
                        let total: f64 = probs.iter().sum();
                        if probs.iter().any(|&p| !(p >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                            return bad(format!("row ({h},{s}) is not a distribution"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Index of the largest entry; the smallest index wins ties.
pub fn greedy_action(values: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = a;
        }
    }
    best
}

/// `(B_h V)(s,a) = R_h(s,a) + Σ_{s'} P_h(s'|s,a) V(s')` as an `S×A` table.
pub fn bellman_apply(mdp: &LinearMdp, step: usize, v_next: &[f64]) -> Vec<Vec<f64>> {
    (0..mdp.num_states)
        .map(|s| {
            (0..mdp.num_actions)
                .map(|a| {
                    mdp.mean_reward(step, s, a) + dot(&mdp.transition_probs(step, s, a), v_next)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalValues {
    pub v: VTable,
    pub q: QTable,
    pub policy: Policy,
}

pub fn exact_optimal_values(mdp: &LinearMdp) -> OptimalValues {
    let (s_count, h_count) = (mdp.num_states, mdp.horizon);
    let mut v = vec![vec![0.0; s_count]; h_count + 1];
    let mut q = vec![Vec::new(); h_count];
    let mut actions = vec![vec![0; s_count]; h_count];
    for h in (0..h_count).rev() {
        let qh = bellman_apply(mdp, h, &v[h + 1]);
        for s in 0..s_count {
            let a = greedy_action(&qh[s]);
            actions[h][s] = a;
            v[h][s] = qh[s][a];
        }
        q[h] = qh;
    }
    OptimalValues {
        v,
        q,
        policy: Policy::Deterministic(actions),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyValues {
    pub v: VTable,
    pub q: QTable,
}

pub fn exact_policy_values(mdp: &LinearMdp, policy: &Policy) -> PolicyValues {
    let (s_count, a_count, h_count) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    let mut v = vec![vec![0.0; s_count]; h_count + 1];
    let mut q = vec![Vec::new(); h_count];
    for h in (0..h_count).rev() {
        let qh = bellman_apply(mdp, h, &v[h + 1]);
        for s in 0..s_count {
            v[h][s] = (0..a_count).map(|a| policy.prob(h, s, a) * qh[s][a]).sum();
        }
        q[h] = qh;
    }
    PolicyValues { v, q }
}

/// State distributions `d_h` under `policy`, started from the initial state.
pub fn state_occupancy(mdp: &LinearMdp, policy: &Policy) -> VTable {
    let (s_count, a_count, h_count) = (mdp.num_states, mdp.num_actions, mdp.horizon);
    let mut occupancy = vec![vec![0.0; s_count]; h_count];
    occupancy[0][mdp.initial_state] = 1.0;
    for h in 0..h_count.saturating_sub(1) {
        let mut next = vec![0.0; s_count];
        for s in 0..s_count {
            let mass = occupancy[h][s];
            if mass == 0.0 {
                continue;
            }
            for a in 0..a_count {
                let pa = policy.prob(h, s, a);
                if pa == 0.0 {
                    continue;
                }
                for (n, p) in next.iter_mut().zip(mdp.transition_probs(h, s, a)) {
                    *n += mass * pa * p;
                }
            }
        }
        occupancy[h + 1] = next;
    }
    occupancy
}
