//! Two-layer networks with symmetric initialization, their tangent kernel,
//! and the network-based solver.

pub mod fit;
pub mod kernel;
pub mod net;
pub mod solver;
pub mod stacked;

pub use fit::{fit_reward_network, fit_value_network, FitDiagnostics, FitMode, NetworkFit, OptimizerConfig};
pub use kernel::{compute_beta_theorem1, ntk_kernel, trajectory_kernel, Theorem1Constants};
pub use net::{Activation, TwoLayerNet};
pub use solver::{
    solve_neural_parted, NetworkCheckpoint, NeuralBeta, NeuralPartedConfig, NeuralPartedSolution, PenaltyPoint,
};
pub use stacked::{PenaltyPath, StackedRidge};
