//! Comparison solvers that share the linear backward pass.
//!
//! The oracle regresses `r_h + V̂_{h+1}(s_{h+1})` jointly; since ridge is linear
//! in its targets this equals a reward fit plus the usual transition-value fit
//! on the same `Λ_h`, which is how it is computed here.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::OfflineDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linear::{
    linear_table, size_warnings, solve_with_reward_channel, step_ridge, LinearPartedConfig,
    LinearPartedSolution, RewardChannel, SolverKind,
};

/// Per-step ridge fits of arbitrary per-step targets, with no reward bonus.
pub fn per_step_reward_channel(
    dataset: &OfflineDataset,
    features: &FeatureMap,
    reg: f64,
    mut target: impl FnMut(&crate::dataset::TrajectoryRecord, usize) -> f64,
) -> Result<RewardChannel> {
    dataset.ensure_matches(features)?;
    let horizon = dataset.horizon();
    let mut weights = Vec::with_capacity(horizon);
    let mut proxy = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let (w, _) = step_ridge(dataset, features, reg, h, |rec| target(rec, h))?;
        proxy.push(linear_table(features, &w));
        weights.push(w);
    }
    let zeros = vec![vec![vec![0.0; features.num_actions()]; features.num_states()]; horizon];
    Ok(RewardChannel {
        weights,
        proxy,
        bonus: zeros,
    })
}

/// Ridge fits of the true instantaneous rewards.
pub fn oracle_reward_channel(dataset: &OfflineDataset, features: &FeatureMap, reg: f64) -> Result<RewardChannel> {
    if !dataset.has_step_rewards() {
        return Err(Error::MissingStepRewards);
    }
    per_step_reward_channel(dataset, features, reg, |rec, h| {
        rec.hidden_step_rewards().map_or(0.0, |r| r[h])
    })
}

/// Ridge fits of `r(τ)/H` at every step.
pub fn uniform_split_channel(dataset: &OfflineDataset, features: &FeatureMap, reg: f64) -> Result<RewardChannel> {
    let horizon = dataset.horizon() as f64;
    per_step_reward_channel(dataset, features, reg, |rec, _| rec.ret() / horizon)
}

fn solve_per_step(
    kind: SolverKind,
    dataset: &OfflineDataset,
    features: &FeatureMap,
    config: &LinearPartedConfig,
    channel: RewardChannel,
) -> Result<LinearPartedSolution> {
    let mut warnings = config.validate()?;
    size_warnings(dataset.len(), features.dim(), &mut warnings);
    let (_, beta2) = config.beta.resolve(features.dim(), dataset.horizon(), dataset.len())?;
    let (transition_weights, value_systems, estimate) =
        solve_with_reward_channel(dataset, features, &channel, config.lambda2, 0.0, beta2, config.clip)?;
    Ok(LinearPartedSolution {
        solver: kind,
        reward_weights: channel.weights,
        reward_system: None,
        transition_weights,
        value_systems,
        estimate,
        warnings,
    })
}

/// Pessimistic value iteration with access to the true per-step rewards.
/// Penalty is `β₂·b_v` only.
pub fn solve_pevi_oracle(
    dataset: &OfflineDataset,
    features: &FeatureMap,
    config: &LinearPartedConfig,
) -> Result<LinearPartedSolution> {
    let channel = oracle_reward_channel(dataset, features, config.lambda2)?;
    solve_per_step(SolverKind::PeviOracle, dataset, features, config, channel)
}

/// Splits every return evenly over the steps, then runs the oracle's
/// backward pass. Deliberately optimistic: `β₁ = 0`.
pub fn solve_uniform_split(
    dataset: &OfflineDataset,
    features: &FeatureMap,
    config: &LinearPartedConfig,
) -> Result<LinearPartedSolution> {
    let channel = uniform_split_channel(dataset, features, config.lambda2)?;
    solve_per_step(SolverKind::UniformSplit, dataset, features, config, channel)
}
