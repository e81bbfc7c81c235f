//! Exact suboptimality, evaluation errors and the three-term decomposition,
//! plus the small amount of statistics used to summarize sweeps.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{CoverageReport, OfflineDataset};
use crate::linear::SolverKind;
use crate::mdp::{bellman_apply, exact_optimal_values, exact_policy_values, state_occupancy, LinearMdp, Policy, QTable};
use crate::pessimism::ValueEstimate;

/// `δ_h(s,a) = (B_h V̂_{h+1})(s,a) − Q̂_h(s,a)`.
pub fn evaluation_errors(mdp: &LinearMdp, estimate: &ValueEstimate) -> QTable {
    (0..mdp.horizon)
        .map(|h| {
            let backup = bellman_apply(mdp, h, &estimate.v[h + 1]);
            backup
                .iter()
                .zip(&estimate.q[h])
                .map(|(b, q)| b.iter().zip(q).map(|(b, q)| b - q).collect())
                .collect()
        })
        .collect()
}

/// `SubOpt = −Σ E_π̂[δ_h] + Σ E_π*[δ_h] + Σ E_π*[⟨Q̂_h, π*_h − π̂_h⟩]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub learned_error: f64,
    pub optimal_error: f64,
    pub greedy_gap: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMeta {
    pub n: usize,
    pub seed: u64,
    pub solver: SolverKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub subopt: f64,
    pub vstar: f64,
    pub vpi: f64,
    pub delta: QTable,
    pub min_delta: f64,
    pub max_delta: f64,
    pub decomposition: Decomposition,
    pub max_total_penalty: f64,
    pub beta1: f64,
    pub beta2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<EvalMeta>,
}

impl EvalReport {
    /// `δ_h(s,a) ≥ −tol` everywhere.
    pub fn pessimism_holds(&self, tol: f64) -> bool {
        self.min_delta >= -tol
    }

    /// `δ_h(s,a) ≤ 2Γ_h(s,a) + tol` everywhere.
    pub fn penalty_bound_holds(&self, estimate: &ValueEstimate, tol: f64) -> bool {
        self.delta
            .iter()
            .zip(&estimate.penalty)
            .flat_map(|(d, g)| d.iter().flatten().zip(g.iter().flatten()))
            .all(|(&d, &g)| d <= 2.0 * g + tol)
    }
}

fn expectation(occupancy: &[f64], policy: &Policy, step: usize, table: &[Vec<f64>]) -> f64 {
    occupancy
        .iter()
        .enumerate()
        .filter(|(_, &mass)| mass != 0.0)
        .map(|(s, &mass)| {
            let inner: f64 = table[s]
                .iter()
                .enumerate()
                .map(|(a, &x)| policy.prob(step, s, a) * x)
                .sum();
            mass * inner
        })
        .sum()
}

pub fn evaluate(mdp: &LinearMdp, estimate: &ValueEstimate) -> EvalReport {
    let s1 = mdp.initial_state;
    let optimal = exact_optimal_values(mdp);
    let learned = estimate.greedy_policy();
    let achieved = exact_policy_values(mdp, &learned);
    let (vstar, vpi) = (optimal.v[0][s1], achieved.v[0][s1]);
    let subopt = vstar - vpi;

    let delta = evaluation_errors(mdp, estimate);
    let d_learned = state_occupancy(mdp, &learned);
    let d_optimal = state_occupancy(mdp, &optimal.policy);
    let mut learned_error = 0.0;
    let mut optimal_error = 0.0;
    let mut greedy_gap = 0.0;
    for h in 0..mdp.horizon {
        learned_error -= expectation(&d_learned[h], &learned, h, &delta[h]);
        optimal_error += expectation(&d_optimal[h], &optimal.policy, h, &delta[h]);
        for (s, &mass) in d_optimal[h].iter().enumerate() {
            let q = &estimate.q[h][s];
            greedy_gap += mass * (q[optimal_action(&optimal.policy, h, s)] - q[estimate.policy[h][s]]);
        }
    }
    let residual = libm::fabs(subopt - (learned_error + optimal_error + greedy_gap));

    let (mut min_delta, mut max_delta) = (f64::INFINITY, f64::NEG_INFINITY);
    for &x in delta.iter().flatten().flatten() {
        min_delta = min_delta.min(x);
        max_delta = max_delta.max(x);
    }
    EvalReport {
        subopt,
        vstar,
        vpi,
        delta,
        min_delta,
        max_delta,
        decomposition: Decomposition {
            learned_error,
            optimal_error,
            greedy_gap,
            residual,
        },
        max_total_penalty: estimate.max_total_penalty(),
        beta1: estimate.beta1,
        beta2: estimate.beta2,
        coverage: None,
        meta: None,
    }
}

fn optimal_action(policy: &Policy, step: usize, state: usize) -> usize {
    match policy {
        Policy::Deterministic(a) => a[step][state],
        Policy::Stochastic(p) => crate::mdp::greedy_action(&p[step][state]),
    }
}

/// `max_h max_{(s,a) visited at h} |R̂_h(s,a) − R_h(s,a)|`.
pub fn reward_error(mdp: &LinearMdp, proxy_reward: &QTable, dataset: &OfflineDataset) -> f64 {
    let mut visited = vec![vec![vec![false; mdp.num_actions]; mdp.num_states]; mdp.horizon];
    for rec in dataset.records() {
        for (h, row) in visited.iter_mut().enumerate() {
            let (s, a) = rec.pair(h);
            row[s][a] = true;
        }
    }
    let mut worst = 0.0_f64;
    for h in 0..mdp.horizon {
        for s in 0..mdp.num_states {
            for a in 0..mdp.num_actions {
                if visited[h][s][a] {
                    worst = worst.max(libm::fabs(proxy_reward[h][s][a] - mdp.mean_reward(h, s, a)));
                }
            }
        }
    }
    worst
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear-interpolation quantile; `None` for empty input.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let v = sorted(values);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - lo as f64;
    Some(v[lo] + frac * (v[hi] - v[lo]))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

pub fn iqr(values: &[f64]) -> Option<f64> {
    Some(quantile(values, 0.75)? - quantile(values, 0.25)?)
}

/// Least-squares slope of `ln y` against `ln x`. Needs two distinct `x` and
/// positive values throughout.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|&x| libm::log(x)).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| libm::log(y)).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{generate_random_mdp, greedy_action};
    use crate::pessimism::ClipMode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn estimate_from_q(mdp: &LinearMdp, q: QTable) -> ValueEstimate {
        let mut est = ValueEstimate::new(mdp.horizon, mdp.num_states, mdp.num_actions, 0.0, 0.0, ClipMode::PerStep);
        for h in 0..mdp.horizon {
            for s in 0..mdp.num_states {
                let a = greedy_action(&q[h][s]);
                est.policy[h][s] = a;
                est.v[h][s] = q[h][s][a];
            }
        }
        est.q = q;
        est
    }

    #[test]
    fn optimal_solution_has_no_error() {
        let mdp = generate_random_mdp(3, 6, 3, 4, 4, 1.0).unwrap();
        let opt = exact_optimal_values(&mdp);
        let report = evaluate(&mdp, &estimate_from_q(&mdp, opt.q));
        assert!(report.subopt.abs() < 1e-12);
        assert!(report.min_delta.abs() < 1e-12 && report.max_delta.abs() < 1e-12);
    }

    #[test]
    fn zero_q_uses_first_action() {
        let mdp = generate_random_mdp(4, 6, 3, 4, 4, 1.0).unwrap();
        let zeros = vec![vec![vec![0.0; 3]; 6]; 4];
        let report = evaluate(&mdp, &estimate_from_q(&mdp, zeros));
        let floor = exact_policy_values(&mdp, &Policy::constant(4, 6, 0));
        let opt = exact_optimal_values(&mdp);
        assert!((report.subopt - (opt.v[0][0] - floor.v[0][0])).abs() < 1e-12);
        assert!(report.min_delta >= 0.0);
    }

    #[test]
    fn backup_q_gives_zero_delta() {
        let mdp = generate_random_mdp(5, 5, 2, 3, 3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut est = estimate_from_q(&mdp, vec![vec![vec![0.0; 2]; 5]; 3]);
        for h in (0..3).rev() {
            let mut v_next = est.v[h + 1].clone();
            for x in v_next.iter_mut() {
                *x += rng.random_range(0.0..0.1);
            }
            est.v[h + 1] = v_next;
            est.q[h] = bellman_apply(&mdp, h, &est.v[h + 1]);
        }
        let delta = evaluation_errors(&mdp, &est);
        assert!(delta.iter().flatten().flatten().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn decomposition_closes_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..30 {
            let mdp = generate_random_mdp(seed, 5, 3, 4, 4, 1.0).unwrap();
            let q: QTable = (0..4)
                .map(|_| (0..5).map(|_| (0..3).map(|_| rng.random_range(0.0..4.0)).collect()).collect())
                .collect();
            let report = evaluate(&mdp, &estimate_from_q(&mdp, q));
            assert!(report.decomposition.residual <= 1e-8, "{:?}", report.decomposition);
            assert!(report.decomposition.greedy_gap <= 1e-10);
            assert!(report.subopt >= -1e-10);
        }
    }

    #[test]
    fn statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        assert_eq!(iqr(&[1.0, 2.0, 3.0, 4.0, 5.0]), Some(2.0));
        assert_eq!(mean(&[1.0, 2.0]), Some(1.5));
        let xs = [100.0, 200.0, 400.0, 800.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * libm::pow(*x, -0.5)).collect();
        assert!((loglog_slope(&xs, &ys).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(loglog_slope(&[1.0, 1.0], &[1.0, 2.0]), None);
        assert_eq!(loglog_slope(&[1.0, 2.0], &[0.0, 2.0]), None);
    }
}
