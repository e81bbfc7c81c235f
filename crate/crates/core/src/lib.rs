//! Offline reinforcement learning from trajectory-wise returns.
//!
//! Returns observed only at the end of each episode are redistributed into
//! per-step proxy rewards by least squares over stacked trajectory features,
//! then a pessimistic backward value iteration penalizes both the proxy reward
//! (through a one-block-hot bonus on the trajectory covariance) and the
//! transition-value estimate. Linear and two-layer-network function classes are
//! supported, together with exact finite-MDP oracles for measuring
//! suboptimality.
#![no_std]

extern crate alloc;

pub mod baselines;
pub mod calibrate;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod features;
pub mod linalg;
pub mod linear;
pub mod mdp;
pub mod neural;
pub mod pessimism;
pub mod seed;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
