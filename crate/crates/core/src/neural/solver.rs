use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::fit::{fit_reward_network, fit_value_network, FitDiagnostics, FitMode, OptimizerConfig};
use super::kernel::{compute_beta_theorem1, corollary1_betas, visit_indices, Theorem1Constants};
use super::net::{Activation, TwoLayerNet};
use super::stacked::{PenaltyPath, StackedRidge};
use crate::dataset::OfflineDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::check_reg;
use crate::linear::{size_warnings, Warning};
use crate::pessimism::{ClipMode, ValueEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum NeuralBeta {
    Explicit { beta1: f64, beta2: f64 },
    Theorem1(Theorem1Constants),
    Corollary1 { d1: f64, d2: f64, constant: f64 },
}

impl Default for NeuralBeta {
    fn default() -> Self {
        NeuralBeta::Theorem1(Theorem1Constants::default())
    }
}

/// Where the gradient features behind the penalties are taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPoint {
    /// At the fitted `θ̂_h`, `ŵ_h`.
    #[default]
    Learned,
    /// At `θ₀`, `w₀`.
    Init,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuralPartedConfig {
    /// Half width `m`; the network has `2m` hidden units.
    pub half_width: usize,
    pub net_seed: u64,
    pub activation: Activation,
    /// `None` means `1 + 1/N`.
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub optimizer: OptimizerConfig,
    pub mode: FitMode,
    pub beta: NeuralBeta,
    /// Ignored in closed-form mode, whose linearized model has the
    /// initialization features as its gradient.
    pub penalty_point: PenaltyPoint,
    pub penalty_path: PenaltyPath,
    pub dual_threshold: usize,
    pub clip: ClipMode,
}

impl Default for NeuralPartedConfig {
    fn default() -> Self {
        Self {
            half_width: 32,
            net_seed: 0,
            activation: Activation::default(),
            lambda1: None,
            lambda2: None,
            optimizer: OptimizerConfig::default(),
            mode: FitMode::default(),
            beta: NeuralBeta::default(),
            penalty_point: PenaltyPoint::default(),
            penalty_path: PenaltyPath::default(),
            dual_threshold: 4096,
            clip: ClipMode::Flat,
        }
    }
}

impl NeuralPartedConfig {
    pub fn regularization(&self, n: usize) -> (f64, f64) {
        let default = 1.0 + 1.0 / n as f64;
        (self.lambda1.unwrap_or(default), self.lambda2.unwrap_or(default))
    }
}

#[derive(Debug, Clone)]
pub struct NeuralPartedSolution {
    pub net: TwoLayerNet,
    pub reward_params: Vec<Vec<f64>>,
    pub value_params: Vec<Vec<f64>>,
    pub reward_fit: FitDiagnostics,
    pub value_fits: Vec<FitDiagnostics>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub estimate: ValueEstimate,
    pub warnings: Vec<Warning>,
}

/// Everything needed to rebuild a trained solver's networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCheckpoint {
    pub net: TwoLayerNet,
    pub reward_params: Vec<Vec<f64>>,
    pub value_params: Vec<Vec<f64>>,
}

impl NeuralPartedSolution {
    pub fn checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            net: self.net.clone(),
            reward_params: self.reward_params.clone(),
            value_params: self.value_params.clone(),
        }
    }
}

fn validate(config: &NeuralPartedConfig, lambda1: f64, lambda2: f64) -> Result<Vec<Warning>> {
    if config.half_width == 0 {
        return Err(Error::InvalidParameter {
            name: "half_width",
            reason: "must be at least 1".into(),
        });
    }
    let mut warnings = Vec::new();
    for (name, value) in [("lambda1", lambda1), ("lambda2", lambda2)] {
        check_reg(value)?;
        if value < 1.0 {
            warnings.push(Warning::SmallRegularization {
                parameter: name.into(),
                value,
            });
        }
    }
    if let NeuralBeta::Explicit { beta1, beta2 } = config.beta {
        if !(beta1 >= 0.0 && beta2 >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must be non-negative, got ({beta1}, {beta2})"),
            });
        }
    }
    Ok(warnings)
}

pub fn resolve_neural_betas(
    config: &NeuralPartedConfig,
    dataset: &OfflineDataset,
    net: &TwoLayerNet,
    inputs: &FeatureMap,
    lambda1: f64,
    lambda2: f64,
) -> Result<(f64, f64)> {
    match config.beta {
        NeuralBeta::Explicit { beta1, beta2 } => Ok((beta1, beta2)),
        NeuralBeta::Theorem1(constants) => compute_beta_theorem1(dataset, net, inputs, lambda1, lambda2, &constants),
        NeuralBeta::Corollary1 { d1, d2, constant } => Ok(corollary1_betas(d1, d2, constant, dataset.horizon())),
    }
}

/// `inputs` supplies the network input `x(s,a)` for every pair.
pub fn solve_neural_parted(
    dataset: &OfflineDataset,
    inputs: &FeatureMap,
    config: &NeuralPartedConfig,
) -> Result<NeuralPartedSolution> {
    dataset.ensure_matches(inputs)?;
    let n = dataset.len();
    let horizon = dataset.horizon();
    let (lambda1, lambda2) = config.regularization(n);
    let mut warnings = validate(config, lambda1, lambda2)?;
    size_warnings(n, inputs.dim(), &mut warnings);
    let net = TwoLayerNet::init_symmetric(config.net_seed, config.half_width, inputs.dim(), config.activation)?;
    let (beta1, beta2) = resolve_neural_betas(config, dataset, &net, inputs, lambda1, lambda2)?;
    let init_features = net.feature_map(inputs, &net.init);
    let visits = visit_indices(dataset, inputs);
    let (path, threshold) = (config.penalty_path, config.dual_threshold);
    let learned = config.mode == FitMode::Gd && config.penalty_point == PenaltyPoint::Learned;
    let features_at = |params: &[f64]| {
        if learned {
            net.feature_map(inputs, params)
        } else {
            init_features.clone()
        }
    };

    let reward = fit_reward_network(dataset, inputs, &net, lambda1, &config.optimizer, config.mode, path, threshold)?;
    if !reward.diagnostics.converged {
        warnings.push(Warning::FitNotConverged {
            step: None,
            gradient_norm: reward.diagnostics.gradient_norm,
        });
    }
    let (proxy, reward_bonus) = match &reward.ridge {
        Some(ridge) => (ridge.prediction_tables(), ridge.bonus_tables()),
        None => {
            let blocks: Vec<FeatureMap> = reward.params.iter().map(|p| features_at(p)).collect();
            let cov = StackedRidge::fit(blocks, visits.clone(), &vec![0.0; n], lambda1, path, threshold)?;
            let proxy = reward.params.iter().map(|p| net.output_table(inputs, p)).collect();
            (proxy, cov.bonus_tables())
        }
    };

    let mut estimate = ValueEstimate::new(horizon, inputs.num_states(), inputs.num_actions(), beta1, beta2, config.clip);
    let mut value_params = vec![Vec::new(); horizon];
    let mut value_fits = vec![None; horizon];
    for h in (0..horizon).rev() {
        let fit = fit_value_network(
            dataset,
            inputs,
            &estimate.v[h + 1],
            &net,
            lambda2,
            &config.optimizer,
            config.mode,
            h,
            path,
            threshold,
        )?;
        if !fit.diagnostics.converged {
            warnings.push(Warning::FitNotConverged {
                step: Some(h),
                gradient_norm: fit.diagnostics.gradient_norm,
            });
        }
        let (transition, value_bonus) = match &fit.ridge {
            Some(ridge) => (ridge.prediction_tables().remove(0), ridge.bonus_tables().remove(0)),
            None => {
                let step_visits: Vec<Vec<usize>> = visits.iter().map(|v| vec![v[h]]).collect();
                let cov = StackedRidge::fit(vec![features_at(&fit.params[0])], step_visits, &vec![0.0; n], lambda2, path, threshold)?;
                (net.output_table(inputs, &fit.params[0]), cov.bonus_tables().remove(0))
            }
        };
        estimate.set_step(h, proxy[h].clone(), transition, reward_bonus[h].clone(), value_bonus);
        value_params[h] = fit.params.into_iter().next().unwrap_or_default();
        value_fits[h] = Some(fit.diagnostics);
    }

    Ok(NeuralPartedSolution {
        net,
        reward_params: reward.params,
        value_params,
        reward_fit: reward.diagnostics,
        value_fits: value_fits.into_iter().flatten().collect(),
        lambda1,
        lambda2,
        estimate,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::collect;
    use crate::dataset::BehaviorPolicy;
    use crate::linear::{solve_linear_parted, LinearPartedConfig};
    use crate::mdp::{generate_random_mdp, LinearMdp};

    fn setup(n: usize) -> (LinearMdp, OfflineDataset) {
        let mdp = generate_random_mdp(21, 5, 2, 3, 4, 1.0).unwrap();
        let data = collect(&mdp, &BehaviorPolicy::Uniform, n, 3, false).unwrap();
        (mdp, data)
    }

    #[test]
    fn closed_form_reduces_to_linear_solver() {
        let (mdp, data) = setup(40);
        let inputs = mdp.feature_map();
        let config = NeuralPartedConfig {
            half_width: 4,
            lambda1: Some(1.0),
            lambda2: Some(1.0),
            mode: FitMode::Ntk,
            beta: NeuralBeta::Explicit { beta1: 0.2, beta2: 0.1 },
            clip: ClipMode::PerStep,
            ..NeuralPartedConfig::default()
        };
        let neural = solve_neural_parted(&data, &inputs, &config).unwrap();
        let ntk_features = neural.net.feature_map(&inputs, &neural.net.init);
        let linear = solve_linear_parted(&data, &ntk_features, &LinearPartedConfig::explicit(0.2, 0.1)).unwrap();
        for (a, b) in neural.estimate.q.iter().flatten().flatten().zip(linear.estimate.q.iter().flatten().flatten()) {
            assert!((a - b).abs() < 1e-8);
        }
        let dual = solve_neural_parted(&data, &inputs, &NeuralPartedConfig { penalty_path: PenaltyPath::Dual, ..config }).unwrap();
        for (a, b) in dual.estimate.q.iter().flatten().flatten().zip(linear.estimate.q.iter().flatten().flatten()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn huge_beta_zeroes_q() {
        let (mdp, data) = setup(20);
        let config = NeuralPartedConfig {
            half_width: 4,
            mode: FitMode::Ntk,
            beta: NeuralBeta::Explicit { beta1: 1e6, beta2: 1e6 },
            ..NeuralPartedConfig::default()
        };
        let sol = solve_neural_parted(&data, &mdp.feature_map(), &config).unwrap();
        assert!(sol.estimate.q.iter().flatten().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn gd_solution_is_clipped_and_within_balls() {
        let (mdp, data) = setup(30);
        let config = NeuralPartedConfig {
            half_width: 4,
            optimizer: OptimizerConfig {
                max_iterations: 3000,
                ..OptimizerConfig::default()
            },
            ..NeuralPartedConfig::default()
        };
        let sol = solve_neural_parted(&data, &mdp.feature_map(), &config).unwrap();
        assert!(sol.estimate.q.iter().flatten().flatten().all(|&x| (0.0..=3.0).contains(&x)));
        assert!(sol.reward_fit.within_ball());
        assert!(sol.value_fits.iter().all(FitDiagnostics::within_ball));
        assert_eq!(sol.lambda1, 1.0 + 1.0 / 30.0);
        let ckpt = sol.checkpoint();
        assert_eq!(ckpt.value_params.len(), 3);
        let rebuilt = TwoLayerNet::init_symmetric(ckpt.net.seed, ckpt.net.half_width, ckpt.net.input_dim, ckpt.net.activation).unwrap();
        assert_eq!(rebuilt, ckpt.net);
    }
}
