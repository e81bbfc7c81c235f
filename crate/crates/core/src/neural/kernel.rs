use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::net::TwoLayerNet;
use crate::dataset::OfflineDataset;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{dot, gram_log_det};

/// `K(x,x′) = (1/2m) Σ_r σ′(w₀ᵣᵀx) σ′(w₀ᵣᵀx′) xᵀx′`.
pub fn ntk_kernel(net: &TwoLayerNet, x: &[f64], y: &[f64]) -> f64 {
    let d = net.input_dim;
    let sum: f64 = (0..net.width())
        .map(|r| {
            let row = &net.init[r * d..(r + 1) * d];
            net.activation.derivative(dot(row, x)) * net.activation.derivative(dot(row, y))
        })
        .sum();
    sum * dot(x, y) / net.width() as f64
}

/// `K_H(τ,τ′) = Σ_h K(x_h, x′_h)`.
pub fn trajectory_kernel(net: &TwoLayerNet, a: &[&[f64]], b: &[&[f64]]) -> f64 {
    a.iter().zip(b).map(|(x, y)| ntk_kernel(net, x, y)).sum()
}

/// `K` between every pair of state-action inputs.
pub fn input_kernel_table(net: &TwoLayerNet, inputs: &FeatureMap) -> DMatrix<f64> {
    let n = inputs.num_inputs();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = ntk_kernel(net, inputs.feature_at(i), inputs.feature_at(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Input index of `x^τ_h` for every trajectory and step.
pub fn visit_indices(dataset: &OfflineDataset, inputs: &FeatureMap) -> Vec<Vec<usize>> {
    dataset
        .records()
        .iter()
        .map(|rec| {
            (0..rec.horizon())
                .map(|h| {
                    let (s, a) = rec.pair(h);
                    inputs.index(s, a)
                })
                .collect()
        })
        .collect()
}

/// `[K_H(τᵢ,τⱼ)]`, assembled by indexed writes from a per-input table.
pub fn trajectory_gram(table: &DMatrix<f64>, visits: &[Vec<usize>]) -> DMatrix<f64> {
    let n = visits.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = visits[i].iter().zip(&visits[j]).map(|(&a, &b)| table[(a, b)]).sum();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `[K(x^{τᵢ}_h, x^{τⱼ}_h)]`.
pub fn step_gram(table: &DMatrix<f64>, visits: &[Vec<usize>], step: usize) -> DMatrix<f64> {
    let n = visits.len();
    DMatrix::from_fn(n, n, |i, j| table[(visits[i][step], visits[j][step])])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem1Constants {
    pub a2: f64,
    pub big_a2: f64,
    pub c_eps: f64,
    /// Stand-in for the log covering number of the value class.
    pub log_cover: f64,
}

impl Default for Theorem1Constants {
    fn default() -> Self {
        Self {
            a2: 1.0,
            big_a2: 1.0,
            c_eps: 1.0,
            log_cover: libm::log(1000.0),
        }
    }
}

/// `β₁ = H√(4a₂²λ₁/d + 2 logdet(I+K_r/λ₁) + 10 ln(NH²))` and
/// `β₂ = H√(8A₂²λ₂/d + 4 max_h logdet(I+K_{v,h}/λ₂) + 6C_ε + 16(ln(NH²) + log N_ε))`.
#[allow(clippy::too_many_arguments)]
pub fn theorem1_betas(
    constants: &Theorem1Constants,
    input_dim: usize,
    horizon: usize,
    lambda1: f64,
    lambda2: f64,
    k_r: &DMatrix<f64>,
    k_v: &[DMatrix<f64>],
) -> Result<(f64, f64)> {
    let n = k_r.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let (d, h) = (input_dim as f64, horizon as f64);
    let log_nh2 = libm::log(n as f64 * h * h);
    let reward_gain = gram_log_det(k_r, lambda1)?;
    let mut value_gain = 0.0_f64;
    for k in k_v {
        value_gain = value_gain.max(gram_log_det(k, lambda2)?);
    }
    let Theorem1Constants {
        a2,
        big_a2,
        c_eps,
        log_cover,
    } = *constants;
    let beta1 = h * libm::sqrt(4.0 * a2 * a2 * lambda1 / d + 2.0 * reward_gain + 10.0 * log_nh2);
    let inner = 8.0 * big_a2 * big_a2 * lambda2 / d + 4.0 * value_gain + 6.0 * c_eps + 16.0 * (log_nh2 + log_cover);
    if !(inner >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "beta2",
            reason: format!("radicand {inner} is negative"),
        });
    }
    Ok((beta1, h * libm::sqrt(inner)))
}

/// Gram matrices at initialization from the data, then [`theorem1_betas`].
pub fn compute_beta_theorem1(
    dataset: &OfflineDataset,
    net: &TwoLayerNet,
    inputs: &FeatureMap,
    lambda1: f64,
    lambda2: f64,
    constants: &Theorem1Constants,
) -> Result<(f64, f64)> {
    let table = input_kernel_table(net, inputs);
    let visits = visit_indices(dataset, inputs);
    let k_r = trajectory_gram(&table, &visits);
    let k_v: Vec<DMatrix<f64>> = (0..dataset.horizon()).map(|h| step_gram(&table, &visits, h)).collect();
    theorem1_betas(constants, net.input_dim, dataset.horizon(), lambda1, lambda2, &k_r, &k_v)
}

/// `β₁ = c·H·D₁`, `β₂ = c·H·max(D₁, D₂)`.
pub fn corollary1_betas(d1: f64, d2: f64, constant: f64, horizon: usize) -> (f64, f64) {
    let h = horizon as f64;
    (constant * h * d1, constant * h * d1.max(d2))
}
