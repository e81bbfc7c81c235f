//! Clipping, penalty assembly and greedy extraction shared by every solver.
//! Routing all solvers through [`ValueEstimate::set_step`] is what makes
//! cross-solver differences attributable to the reward channel alone.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::mdp::{greedy_action, Policy, QTable, VTable};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    /// Ceiling `H − h + 1` (1-based step), as in the linear algorithm.
    #[default]
    PerStep,
    /// Ceiling `H`, as in the neural algorithm.
    Flat,
}

impl ClipMode {
    pub fn ceiling(self, horizon: usize, step: usize) -> f64 {
        match self {
            ClipMode::PerStep => (horizon - step) as f64,
            ClipMode::Flat => horizon as f64,
        }
    }
}

/// `min{value, ceiling}⁺`.
pub fn clip(value: f64, ceiling: f64) -> f64 {
    value.min(ceiling).max(0.0)
}

/// Everything a solver produces on the finite state-action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    /// `R̂_h(s,a)`.
    pub proxy_reward: QTable,
    /// `(P̂_h V̂_{h+1})(s,a)`.
    pub transition_value: QTable,
    /// `b_{r,h}(s,a)`.
    pub reward_bonus: QTable,
    /// `b_{v,h}(s,a)`.
    pub value_bonus: QTable,
    /// `Γ_h = β₁ b_{r,h} + β₂ b_{v,h}`.
    pub penalty: QTable,
    pub q: QTable,
    /// `H + 1` rows; the last is zero.
    pub v: VTable,
    pub policy: Vec<Vec<usize>>,
    pub beta1: f64,
    pub beta2: f64,
    pub clip: ClipMode,
}

impl ValueEstimate {
    pub(crate) fn new(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        beta1: f64,
        beta2: f64,
        clip: ClipMode,
    ) -> Self {
        let table = vec![vec![vec![0.0; num_actions]; num_states]; horizon];
        Self {
            proxy_reward: table.clone(),
            transition_value: table.clone(),
            reward_bonus: table.clone(),
            value_bonus: table.clone(),
            penalty: table.clone(),
            q: table,
            v: vec![vec![0.0; num_states]; horizon + 1],
            policy: vec![vec![0; num_states]; horizon],
            beta1,
            beta2,
            clip,
        }
    }

    pub fn horizon(&self) -> usize {
        self.q.len()
    }

    pub fn num_states(&self) -> usize {
        self.v[0].len()
    }

    pub fn num_actions(&self) -> usize {
        self.q.first().and_then(|q| q.first()).map_or(0, Vec::len)
    }

    pub fn greedy_policy(&self) -> Policy {
        Policy::Deterministic(self.policy.clone())
    }

    /// Fills step `step` from its four ingredient tables:
    /// `Q̂_h = min{R̂_h + P̂_hV̂_{h+1} − Γ_h, ceiling}⁺`, greedy `π̂_h`, `V̂_h`.
    pub(crate) fn set_step(
        &mut self,
        step: usize,
        proxy_reward: Vec<Vec<f64>>,
        transition_value: Vec<Vec<f64>>,
        reward_bonus: Vec<Vec<f64>>,
        value_bonus: Vec<Vec<f64>>,
    ) {
        let ceiling = self.clip.ceiling(self.horizon(), step);
        let (states, actions) = (self.num_states(), self.num_actions());
        for s in 0..states {
            for a in 0..actions {
                let gamma = self.beta1 * reward_bonus[s][a] + self.beta2 * value_bonus[s][a];
                self.penalty[step][s][a] = gamma;
                self.q[step][s][a] = clip(proxy_reward[s][a] + transition_value[s][a] - gamma, ceiling);
            }
            let best = greedy_action(&self.q[step][s]);
            self.policy[step][s] = best;
            self.v[step][s] = self.q[step][s][best];
        }
        self.proxy_reward[step] = proxy_reward;
        self.transition_value[step] = transition_value;
        self.reward_bonus[step] = reward_bonus;
        self.value_bonus[step] = value_bonus;
    }

    /// `max_{s,a} Σ_h Γ_h(s,a)`.
    pub fn max_total_penalty(&self) -> f64 {
        let (states, actions) = (self.num_states(), self.num_actions());
        let mut best = 0.0_f64;
        for s in 0..states {
            for a in 0..actions {
                best = best.max(self.penalty.iter().map(|g| g[s][a]).sum());
            }
        }
        best
    }
}
