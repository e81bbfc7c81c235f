use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::dataset::TrajectoryRecord;

/// A feature map over a finite state-action space, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    dim: usize,
    num_states: usize,
    num_actions: usize,
    table: Vec<f64>,
}

impl FeatureMap {
    /// Tabulates `f(s, a)`, which must return vectors of length `dim`.
    pub fn from_fn<F>(dim: usize, num_states: usize, num_actions: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> Vec<f64>,
    {
        let mut table = Vec::with_capacity(dim * num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                let phi = f(s, a);
                assert_eq!(phi.len(), dim, "feature length at ({s},{a})");
                table.extend_from_slice(&phi);
            }
        }
        Self {
            dim,
            num_states,
            num_actions,
            table,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    /// Number of state-action pairs.
    pub fn num_inputs(&self) -> usize {
        self.num_states * self.num_actions
    }

    pub fn index(&self, state: usize, action: usize) -> usize {
        state * self.num_actions + action
    }

    pub fn feature(&self, state: usize, action: usize) -> &[f64] {
        self.feature_at(self.index(state, action))
    }

    pub fn feature_at(&self, index: usize) -> &[f64] {
        &self.table[index * self.dim..(index + 1) * self.dim]
    }

    /// `Φ(τ) = [φ(x₁); …; φ(x_H)]`.
    pub fn trajectory_feature(&self, record: &TrajectoryRecord) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim * record.horizon());
        for h in 0..record.horizon() {
            let (s, a) = record.pair(h);
            out.extend_from_slice(self.feature(s, a));
        }
        out
    }

    /// `Φ_h(x)`: `φ(s,a)` in block `step` of a `dim·horizon` vector, zeros elsewhere.
    pub fn one_block_hot(&self, horizon: usize, step: usize, state: usize, action: usize) -> Vec<f64> {
        assert!(step < horizon, "step {step} outside horizon {horizon}");
        let mut out = vec![0.0; self.dim * horizon];
        out[step * self.dim..(step + 1) * self.dim].copy_from_slice(self.feature(state, action));
        out
    }

    /// Inner products `⟨φ(x), φ(x')⟩` between all state-action pairs.
    pub fn kernel_table(&self) -> DMatrix<f64> {
        let design = DMatrix::from_row_slice(self.num_inputs(), self.dim, &self.table);
        let mut k = &design * design.transpose();
        k.fill_upper_triangle_with_lower_triangle();
        k
    }
}
