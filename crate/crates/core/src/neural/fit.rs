use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::kernel::visit_indices;
use super::net::TwoLayerNet;
use super::stacked::{PenaltyPath, StackedRidge};
use crate::dataset::OfflineDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{check_reg, norm};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Full-batch gradient descent on the regularized loss.
    #[default]
    Gd,
    /// Ridge on the gradient features at initialization.
    Ntk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// `None` means `1/(2N)`.
    pub step_size: Option<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Consecutive objective increases treated as divergence.
    pub divergence_window: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step_size: None,
            max_iterations: 50_000,
            tolerance: 1e-8,
            divergence_window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub objective: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `‖θ̂_b − θ₀‖` per block.
    pub distances: Vec<f64>,
    /// `√(Σ y²/λ)`, the radius every block distance must respect.
    pub radius: f64,
}

impl FitDiagnostics {
    pub fn within_ball(&self) -> bool {
        let total: f64 = self.distances.iter().map(|d| d * d).sum();
        libm::sqrt(total) <= self.radius * (1.0 + 1e-9)
    }
}

/// Where inputs and targets of one regression come from.
pub(crate) struct Problem<'a> {
    pub inputs: &'a FeatureMap,
    pub visits: Vec<Vec<usize>>,
    pub targets: Vec<f64>,
    pub reg: f64,
}

impl Problem<'_> {
    fn blocks(&self) -> usize {
        self.visits.first().map_or(0, Vec::len)
    }

    fn radius(&self) -> f64 {
        libm::sqrt(self.targets.iter().map(|y| y * y).sum::<f64>() / self.reg)
    }

    fn distances(&self, net: &TwoLayerNet, params: &[Vec<f64>]) -> Vec<f64> {
        params
            .iter()
            .map(|p| libm::sqrt(p.iter().zip(&net.init).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()))
            .collect()
    }

    /// Objective and its gradient with respect to every block.
    fn objective(&self, net: &TwoLayerNet, params: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
        let inputs = self.inputs.num_inputs();
        let blocks = self.blocks();
        let width = net.width();
        let mut outputs = vec![vec![f64::NAN; inputs]; blocks];
        let mut slopes = vec![0.0; blocks * inputs * width];
        for v in &self.visits {
            for (b, &i) in v.iter().enumerate() {
                if outputs[b][i].is_nan() {
                    let at = (b * inputs + i) * width;
                    outputs[b][i] = net.forward(self.inputs.feature_at(i), &params[b], &mut slopes[at..at + width]);
                }
            }
        }
        let mut coef = vec![vec![0.0; inputs]; blocks];
        let mut loss = 0.0;
        for (v, y) in self.visits.iter().zip(&self.targets) {
            let res = v.iter().enumerate().map(|(b, &i)| outputs[b][i]).sum::<f64>() - y;
            loss += res * res;
            for (b, &i) in v.iter().enumerate() {
                coef[b][i] += res;
            }
        }
        let mut grads = Vec::with_capacity(blocks);
        for (b, p) in params.iter().enumerate() {
            let mut g: Vec<f64> = p.iter().zip(&net.init).map(|(a, z)| 2.0 * self.reg * (a - z)).collect();
            loss += self.reg * p.iter().zip(&net.init).map(|(a, z)| (a - z) * (a - z)).sum::<f64>();
            for (i, &c) in coef[b].iter().enumerate() {
                if c != 0.0 {
                    let at = (b * inputs + i) * width;
                    net.add_slopes(self.inputs.feature_at(i), &slopes[at..at + width], 2.0 * c, &mut g);
                }
            }
            grads.push(g);
        }
        (loss, grads)
    }

    /// Gradient descent from `θ₀`, returning the iterate with the lowest
    /// objective seen.
    pub fn gradient_descent(&self, net: &TwoLayerNet, opt: &OptimizerConfig) -> Result<(Vec<Vec<f64>>, FitDiagnostics)> {
        let step = opt.step_size.unwrap_or(1.0 / (2.0 * self.targets.len() as f64));
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "step_size",
                reason: alloc::format!("must be positive, got {step}"),
            });
        }
        let mut params = vec![net.init.clone(); self.blocks()];
        let mut best = (f64::INFINITY, f64::INFINITY, params.clone());
        let mut previous = f64::INFINITY;
        let mut rising = 0;
        let mut iterations = 0;
        let mut converged = false;
        loop {
            let (loss, grads) = self.objective(net, &params);
            if !loss.is_finite() {
                return Err(Error::Diverged { iterations });
            }
            let gnorm = libm::sqrt(grads.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum());
            if loss < best.0 {
                best = (loss, gnorm, params.clone());
            }
            rising = if loss > previous { rising + 1 } else { 0 };
            if rising >= opt.divergence_window {
                return Err(Error::Diverged { iterations });
            }
            previous = loss;
            if gnorm <= opt.tolerance {
                converged = true;
                best = (loss, gnorm, params.clone());
                break;
            }
            if iterations >= opt.max_iterations {
                break;
            }
            for (p, g) in params.iter_mut().zip(&grads) {
                for (a, b) in p.iter_mut().zip(g) {
                    *a -= step * b;
                }
            }
            iterations += 1;
        }
        let (objective, gradient_norm, params) = best;
        let diagnostics = FitDiagnostics {
            objective,
            gradient_norm,
            iterations,
            converged,
            distances: self.distances(net, &params),
            radius: self.radius(),
        };
        Ok((params, diagnostics))
    }

    /// Ridge on `φ(·, θ₀)` per block; weights are `θ̂ − θ₀`.
    pub fn closed_form(
        &self,
        net: &TwoLayerNet,
        init_features: &FeatureMap,
        path: PenaltyPath,
        threshold: usize,
    ) -> Result<(StackedRidge, FitDiagnostics)> {
        let ridge = StackedRidge::fit(
            vec![init_features.clone(); self.blocks()],
            self.visits.clone(),
            &self.targets,
            self.reg,
            path,
            threshold,
        )?;
        let params: Vec<Vec<f64>> = (0..self.blocks())
            .map(|b| ridge.block_weights(b).iter().zip(&net.init).map(|(d, z)| z + d).collect())
            .collect();
        let distances = self.distances(net, &params);
        let mut objective = 0.0;
        for (v, y) in self.visits.iter().zip(&self.targets) {
            let res = v.iter().enumerate().map(|(b, &i)| ridge.predict(b, i)).sum::<f64>() - y;
            objective += res * res;
        }
        objective += self.reg * distances.iter().map(|d| d * d).sum::<f64>();
        let diagnostics = FitDiagnostics {
            objective,
            gradient_norm: 0.0,
            iterations: 0,
            converged: true,
            distances,
            radius: self.radius(),
        };
        Ok((ridge, diagnostics))
    }
}

pub(crate) fn reward_problem<'a>(dataset: &OfflineDataset, inputs: &'a FeatureMap, reg: f64) -> Result<Problem<'a>> {
    check_reg(reg)?;
    Ok(Problem {
        inputs,
        visits: visit_indices(dataset, inputs),
        targets: dataset.records().iter().map(|r| r.ret()).collect(),
        reg,
    })
}

pub(crate) fn value_problem<'a>(
    dataset: &OfflineDataset,
    inputs: &'a FeatureMap,
    v_next: &[f64],
    reg: f64,
    step: usize,
) -> Result<Problem<'a>> {
    check_reg(reg)?;
    let mut visits = Vec::with_capacity(dataset.len());
    let mut targets = Vec::with_capacity(dataset.len());
    for rec in dataset.records() {
        let (s, a) = rec.pair(step);
        visits.push(vec![inputs.index(s, a)]);
        targets.push(v_next[rec.next_state(step)]);
    }
    Ok(Problem {
        inputs,
        visits,
        targets,
        reg,
    })
}

/// Result of one network fit: per-block parameters and diagnostics.
#[derive(Debug, Clone)]
pub struct NetworkFit {
    pub params: Vec<Vec<f64>>,
    pub diagnostics: FitDiagnostics,
    /// Present in closed-form mode.
    pub ridge: Option<StackedRidge>,
}

fn run(problem: &Problem<'_>, net: &TwoLayerNet, opt: &OptimizerConfig, mode: FitMode, path: PenaltyPath, threshold: usize) -> Result<NetworkFit> {
    if net.input_dim != problem.inputs.dim() {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim,
            found: problem.inputs.dim(),
        });
    }
    match mode {
        FitMode::Gd => {
            let (params, diagnostics) = problem.gradient_descent(net, opt)?;
            Ok(NetworkFit {
                params,
                diagnostics,
                ridge: None,
            })
        }
        FitMode::Ntk => {
            let init = net.feature_map(problem.inputs, &net.init);
            let (ridge, diagnostics) = problem.closed_form(net, &init, path, threshold)?;
            let params = (0..problem.blocks())
                .map(|b| ridge.block_weights(b).iter().zip(&net.init).map(|(d, z)| z + d).collect())
                .collect();
            Ok(NetworkFit {
                params,
                diagnostics,
                ridge: Some(ridge),
            })
        }
    }
}

/// Fits `θ̂_1..θ̂_H` to the trajectory returns.
pub fn fit_reward_network(
    dataset: &OfflineDataset,
    inputs: &FeatureMap,
    net: &TwoLayerNet,
    lambda1: f64,
    opt: &OptimizerConfig,
    mode: FitMode,
    path: PenaltyPath,
    threshold: usize,
) -> Result<NetworkFit> {
    dataset.ensure_matches(inputs)?;
    run(&reward_problem(dataset, inputs, lambda1)?, net, opt, mode, path, threshold)
}

/// Fits `ŵ_h` to `V_next(s_{h+1})`.
#[allow(clippy::too_many_arguments)]
pub fn fit_value_network(
    dataset: &OfflineDataset,
    inputs: &FeatureMap,
    v_next: &[f64],
    net: &TwoLayerNet,
    lambda2: f64,
    opt: &OptimizerConfig,
    mode: FitMode,
    step: usize,
    path: PenaltyPath,
    threshold: usize,
) -> Result<NetworkFit> {
    dataset.ensure_matches(inputs)?;
    run(&value_problem(dataset, inputs, v_next, lambda2, step)?, net, opt, mode, path, threshold)
}

/// `‖θ̂ − θ₀‖` for a single parameter vector.
pub fn distance_from_init(net: &TwoLayerNet, params: &[f64]) -> f64 {
    let diff: Vec<f64> = params.iter().zip(&net.init).map(|(a, b)| a - b).collect();
    norm(&diff)
}
