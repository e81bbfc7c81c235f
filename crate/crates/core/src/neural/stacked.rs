//! Ridge regression over samples that each touch one input per block, with
//! a separate finite feature map per block. With `H` blocks this is the
//! trajectory regression; with one block it is a per-step regression.
//! Solved in the primal (`Σ blocks · dim` unknowns) or, above a size
//! threshold, in the dual through the `N × N` kernel matrix.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::linalg::{dot, DualRidge, RidgeSystem};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPath {
    /// Primal up to the dimension threshold, dual above it.
    #[default]
    Auto,
    Primal,
    Dual,
}

impl PenaltyPath {
    pub fn use_dual(self, dim: usize, threshold: usize) -> Result<bool> {
        match self {
            PenaltyPath::Auto => Ok(dim > threshold),
            PenaltyPath::Dual => Ok(true),
            PenaltyPath::Primal if dim > threshold => Err(Error::DimensionThreshold { dim, threshold }),
            PenaltyPath::Primal => Ok(false),
        }
    }
}

#[derive(Debug, Clone)]
enum Solver {
    Primal(RidgeSystem),
    Dual {
        ridge: DualRidge,
        tables: Vec<DMatrix<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct StackedRidge {
    blocks: Vec<FeatureMap>,
    visits: Vec<Vec<usize>>,
    solver: Solver,
    weights: Vec<Vec<f64>>,
}

impl StackedRidge {
    /// `visits[i][b]` is the input index sample `i` uses in block `b`.
    pub fn fit(
        blocks: Vec<FeatureMap>,
        visits: Vec<Vec<usize>>,
        targets: &[f64],
        reg: f64,
        path: PenaltyPath,
        threshold: usize,
    ) -> Result<Self> {
        if visits.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: visits.len(),
                found: targets.len(),
            });
        }
        let dim = blocks.first().map_or(0, FeatureMap::dim);
        let total = dim * blocks.len();
        let solver = if path.use_dual(total, threshold)? {
            let tables: Vec<DMatrix<f64>> = blocks.iter().map(FeatureMap::kernel_table).collect();
            let n = visits.len();
            let mut gram = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = (0..blocks.len()).map(|b| tables[b][(visits[i][b], visits[j][b])]).sum();
                    gram[(i, j)] = v;
                    gram[(j, i)] = v;
                }
            }
            Solver::Dual {
                ridge: DualRidge::new(&gram, reg)?,
                tables,
            }
        } else {
            let stacked: Vec<Vec<f64>> = visits
                .iter()
                .map(|v| {
                    let mut out = Vec::with_capacity(total);
                    for (b, &idx) in v.iter().enumerate() {
                        out.extend_from_slice(blocks[b].feature_at(idx));
                    }
                    out
                })
                .collect();
            Solver::Primal(RidgeSystem::from_samples(total, &stacked, targets, reg)?)
        };
        let flat = match &solver {
            Solver::Primal(sys) => sys.solution(),
            Solver::Dual { ridge, .. } => {
                // Representer form: x = Σᵢ αᵢ vᵢ with α = (K + λI)⁻¹y.
                let alpha = ridge.solve(targets);
                let mut x = vec![0.0; total];
                for (v, a) in visits.iter().zip(&alpha) {
                    for (b, &idx) in v.iter().enumerate() {
                        for (o, f) in x[b * dim..(b + 1) * dim].iter_mut().zip(blocks[b].feature_at(idx)) {
                            *o += a * f;
                        }
                    }
                }
                x
            }
        };
        let weights = flat.chunks(dim.max(1)).map(<[f64]>::to_vec).collect();
        Ok(Self {
            blocks,
            visits,
            solver,
            weights,
        })
    }

    pub fn is_dual(&self) -> bool {
        matches!(self.solver, Solver::Dual { .. })
    }

    pub fn block_weights(&self, block: usize) -> &[f64] {
        &self.weights[block]
    }

    pub fn predict(&self, block: usize, input: usize) -> f64 {
        dot(self.blocks[block].feature_at(input), &self.weights[block])
    }

    /// Bonus of the one-block-hot query carrying input `input` in block `block`.
    pub fn bonus(&self, block: usize, input: usize) -> f64 {
        match &self.solver {
            Solver::Primal(sys) => {
                let dim = self.blocks[block].dim();
                let mut q = vec![0.0; dim * self.blocks.len()];
                q[block * dim..(block + 1) * dim].copy_from_slice(self.blocks[block].feature_at(input));
                sys.bonus(&q)
            }
            Solver::Dual { ridge, tables } => {
                let t = &tables[block];
                let cross: Vec<f64> = self.visits.iter().map(|v| t[(input, v[block])]).collect();
                ridge.bonus(t[(input, input)], &cross)
            }
        }
    }

    /// Bonus tables, one `S × A` table per block.
    pub fn bonus_tables(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.blocks.len())
            .map(|b| {
                let map = &self.blocks[b];
                (0..map.num_states())
                    .map(|s| (0..map.num_actions()).map(|a| self.bonus(b, map.index(s, a))).collect())
                    .collect()
            })
            .collect()
    }

    pub fn prediction_tables(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.blocks.len())
            .map(|b| {
                let map = &self.blocks[b];
                (0..map.num_states())
                    .map(|s| (0..map.num_actions()).map(|a| self.predict(b, map.index(s, a))).collect())
                    .collect()
            })
            .collect()
    }

    pub fn log_det_ratio(&self) -> f64 {
        match &self.solver {
            Solver::Primal(sys) => sys.log_det_ratio(),
            Solver::Dual { ridge, .. } => ridge.log_det_ratio(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ridge_fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, dim: usize) -> FeatureMap {
        FeatureMap::from_fn(dim, 3, 2, |_, _| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn primal_and_dual_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let blocks: Vec<FeatureMap> = (0..3).map(|_| random_map(&mut rng, 5)).collect();
        let visits: Vec<Vec<usize>> = (0..20).map(|_| (0..3).map(|_| rng.random_range(0..6)).collect()).collect();
        let targets: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..3.0)).collect();
        let p = StackedRidge::fit(blocks.clone(), visits.clone(), &targets, 1.2, PenaltyPath::Primal, 4096).unwrap();
        let d = StackedRidge::fit(blocks, visits, &targets, 1.2, PenaltyPath::Dual, 4096).unwrap();
        assert!(!p.is_dual() && d.is_dual());
        for b in 0..3 {
            for i in 0..6 {
                assert!((p.bonus(b, i) - d.bonus(b, i)).abs() < 1e-9);
                assert!((p.predict(b, i) - d.predict(b, i)).abs() < 1e-9);
            }
        }
        assert!((p.log_det_ratio() - d.log_det_ratio()).abs() < 1e-8);
    }

    #[test]
    fn single_block_is_plain_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let map = random_map(&mut rng, 4);
        let visits: Vec<Vec<usize>> = (0..15).map(|_| vec![rng.random_range(0..6)]).collect();
        let targets: Vec<f64> = (0..15).map(|_| rng.random_range(0.0..1.0)).collect();
        let vectors: Vec<&[f64]> = visits.iter().map(|v| map.feature_at(v[0])).collect();
        let (_, w) = ridge_fit(4, &vectors, &targets, 1.0).unwrap();
        let s = StackedRidge::fit(vec![map], visits, &targets, 1.0, PenaltyPath::Auto, 4096).unwrap();
        assert_eq!(s.block_weights(0), &w[..]);
    }

    #[test]
    fn primal_refuses_oversized_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let map = random_map(&mut rng, 4);
        let err = StackedRidge::fit(vec![map.clone(), map], vec![vec![0, 1]], &[1.0], 1.0, PenaltyPath::Primal, 6);
        assert_eq!(err.unwrap_err(), Error::DimensionThreshold { dim: 8, threshold: 6 });
        assert_eq!(PenaltyPath::Auto.use_dual(8, 6), Ok(true));
        assert_eq!(PenaltyPath::Auto.use_dual(6, 6), Ok(false));
    }
}
