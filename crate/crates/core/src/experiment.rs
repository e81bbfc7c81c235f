//! One sweep cell: collect, solve, evaluate.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::{solve_pevi_oracle, solve_uniform_split};
use crate::dataset::{collect, coverage_diagnostics, BehaviorPolicy, OfflineDataset};
use crate::error::Result;
use crate::evaluation::{evaluate, EvalMeta, EvalReport};
use crate::linear::{solve_linear_parted, LinearPartedConfig, SolverKind, Warning};
use crate::mdp::LinearMdp;
use crate::neural::{solve_neural_parted, NeuralPartedConfig};
use crate::pessimism::ValueEstimate;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub linear: LinearPartedConfig,
    pub neural: NeuralPartedConfig,
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub estimate: ValueEstimate,
    pub warnings: Vec<Warning>,
}

pub fn run_solver(
    kind: SolverKind,
    mdp: &LinearMdp,
    dataset: &OfflineDataset,
    settings: &SolverSettings,
) -> Result<Solved> {
    let features = mdp.feature_map();
    let (estimate, warnings) = match kind {
        SolverKind::PartedLinear => {
            let s = solve_linear_parted(dataset, &features, &settings.linear)?;
            (s.estimate, s.warnings)
        }
        SolverKind::PeviOracle => {
            let s = solve_pevi_oracle(dataset, &features, &settings.linear)?;
            (s.estimate, s.warnings)
        }
        SolverKind::UniformSplit => {
            let s = solve_uniform_split(dataset, &features, &settings.linear)?;
            (s.estimate, s.warnings)
        }
        SolverKind::PartedNeural => {
            let s = solve_neural_parted(dataset, &features, &settings.neural)?;
            (s.estimate, s.warnings)
        }
    };
    Ok(Solved { estimate, warnings })
}

/// One row of a sweep table. `wall_ms` is filled by callers that time cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub solver: SolverKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub subopt: f64,
    pub vstar: f64,
    pub vpi: f64,
    pub min_delta: f64,
    pub max_delta: f64,
    pub decomp_residual: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_min_r: f64,
    pub lambda_min_v: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub row: CellResult,
    pub report: EvalReport,
    pub estimate: ValueEstimate,
}

/// Collects `n` trajectories with `seed`, solves and evaluates.
pub fn run_cell(
    mdp: &LinearMdp,
    kind: SolverKind,
    behavior: &BehaviorPolicy,
    n: usize,
    seed: u64,
    settings: &SolverSettings,
    record_step_rewards: bool,
) -> Result<CellOutput> {
    let dataset = collect(mdp, behavior, n, seed, record_step_rewards)?;
    let solved = run_solver(kind, mdp, &dataset, settings)?;
    let coverage = coverage_diagnostics(&mdp.feature_map(), &dataset, 0.0)?;
    let mut report = evaluate(mdp, &solved.estimate);
    let row = CellResult {
        solver: kind,
        n,
        seed,
        subopt: report.subopt,
        vstar: report.vstar,
        vpi: report.vpi,
        min_delta: report.min_delta,
        max_delta: report.max_delta,
        decomp_residual: report.decomposition.residual,
        beta1: report.beta1,
        beta2: report.beta2,
        lambda_min_r: coverage.trajectory_lambda_min,
        lambda_min_v: coverage.min_step_lambda(),
        wall_ms: 0,
    };
    report.coverage = Some(coverage);
    report.meta = Some(EvalMeta { n, seed, solver: kind });
    Ok(CellOutput {
        row,
        report,
        estimate: solved.estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::generate_random_mdp;

    #[test]
    fn every_solver_runs_a_cell() {
        let mdp = generate_random_mdp(1, 4, 2, 3, 3, 1.0).unwrap();
        let mut settings = SolverSettings::default();
        settings.neural.half_width = 4;
        settings.neural.mode = crate::neural::FitMode::Ntk;
        for kind in SolverKind::ALL {
            let out = run_cell(&mdp, kind, &BehaviorPolicy::Uniform, 30, 5, &settings, true).unwrap();
            assert_eq!(out.row.solver, kind);
            assert!(out.row.subopt >= -1e-10);
            assert!(out.row.decomp_residual <= 1e-8);
        }
        let err = run_cell(&mdp, SolverKind::PeviOracle, &BehaviorPolicy::Uniform, 30, 5, &settings, false);
        assert!(err.is_err());
    }

    #[test]
    fn cells_are_deterministic() {
        let mdp = generate_random_mdp(2, 4, 2, 3, 3, 1.0).unwrap();
        let settings = SolverSettings::default();
        let a = run_cell(&mdp, SolverKind::PartedLinear, &BehaviorPolicy::Uniform, 50, 9, &settings, false).unwrap();
        let b = run_cell(&mdp, SolverKind::PartedLinear, &BehaviorPolicy::Uniform, 50, 9, &settings, false).unwrap();
        assert_eq!(a.row, b.row);
    }
}
