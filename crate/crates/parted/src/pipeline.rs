//! The file-to-file steps behind each subcommand.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use parted_core::baselines::{solve_pevi_oracle, solve_uniform_split};
use parted_core::calibrate::calibrate_theorem2;
use parted_core::dataset::{collect, coverage_diagnostics, CoverageReport, OfflineDataset};
use parted_core::evaluation::{evaluate, EvalMeta};
use parted_core::linear::{solve_linear_parted, SolverKind};
use parted_core::mdp::{validate_mdp, LinearMdp, ValidationReport};
use parted_core::neural::solve_neural_parted;
use parted_core::seed::cell_seed;

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::io::{read_dataset, read_json, read_mdp, to_json, write_dataset, write_json, write_text, SolutionFile};
use crate::sweep::run_sweep;

/// One subcommand with its input files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Job {
    GenMdp,
    Collect {
        mdp: PathBuf,
    },
    Solve {
        mdp: PathBuf,
        data: PathBuf,
    },
    Eval {
        mdp: PathBuf,
        solution: PathBuf,
    },
    Sweep,
    CalibrateBeta,
    Check {
        mdp: PathBuf,
        data: Option<PathBuf>,
        threshold: Option<f64>,
    },
}

impl Job {
    pub fn inputs(&self) -> Vec<PathBuf> {
        match self {
            Job::GenMdp | Job::Sweep | Job::CalibrateBeta => vec![],
            Job::Collect { mdp } => vec![mdp.clone()],
            Job::Solve { mdp, data } => vec![mdp.clone(), data.clone()],
            Job::Eval { mdp, solution } => vec![mdp.clone(), solution.clone()],
            Job::Check { mdp, data, .. } => std::iter::once(mdp.clone()).chain(data.clone()).collect(),
        }
    }

    /// Seeds that determine the output, by role.
    pub fn seeds(&self, config: &Config) -> Vec<NamedSeed> {
        let one = |name: &str, seed| vec![NamedSeed { name: name.into(), seed }];
        match self {
            Job::GenMdp => one("mdp", config.mdp.seed),
            Job::Collect { .. } => one("data", config.data.seed),
            Job::Solve { .. } => one("net", config.solver.neural.net_seed),
            Job::Eval { .. } | Job::Check { .. } => vec![],
            Job::CalibrateBeta => (0..config.beta.calibration_trials as u64)
                .map(|t| NamedSeed {
                    name: format!("calibration/{t}"),
                    seed: cell_seed(config.data.seed, 0, 0, t),
                })
                .collect(),
            Job::Sweep => {
                let s = &config.sweep;
                let mut seeds = one("mdp", config.mdp.seed);
                for &solver in &s.solvers {
                    for (i, &n) in s.n_grid.iter().enumerate() {
                        for t in 0..s.trials {
                            seeds.push(NamedSeed {
                                name: format!("{}/{n}/{t}", solver.tag()),
                                seed: cell_seed(s.master_seed, solver.index() as u64, i as u64, t as u64),
                            });
                        }
                    }
                }
                seeds
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSeed {
    pub name: String,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    /// Files written, in a fixed order.
    pub outputs: Vec<PathBuf>,
    /// Text for standard output when no output path was given.
    pub stdout: Option<String>,
    /// Set when outputs were written but a check failed.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub validation: ValidationReport,
    pub coverage: Option<CoverageReport>,
}

/// Path of the secondary summary written next to a sweep table.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("summary.json")
}

fn require_out<'a>(out: Option<&'a Path>, job: &str) -> CliResult<&'a Path> {
    out.ok_or_else(|| CliError::Usage(format!("{job} requires --out")))
}

/// Writes `text` to `out`, or hands it back for standard output.
fn emit(out: Option<&Path>, text: String, outcome: &mut Outcome) -> CliResult<()> {
    match out {
        Some(path) => {
            write_text(path, &text)?;
            outcome.outputs.push(path.to_path_buf());
        }
        None => outcome.stdout = Some(text),
    }
    Ok(())
}

fn matching(mdp: &LinearMdp, data: &OfflineDataset, path: &Path) -> CliResult<()> {
    let h = data.header();
    if (h.d, h.horizon, h.num_states, h.num_actions) != (mdp.feature_dim, mdp.horizon, mdp.num_states, mdp.num_actions) {
        return Err(CliError::Validation(format!(
            "{} was collected for d={}, H={}, S={}, A={}, which does not match the MDP",
            path.display(),
            h.d,
            h.horizon,
            h.num_states,
            h.num_actions
        )));
    }
    Ok(())
}

pub fn execute(job: &Job, config: &Config, out: Option<&Path>, jobs: usize) -> CliResult<Outcome> {
    let mut outcome = Outcome::default();
    match job {
        Job::GenMdp => {
            let out = require_out(out, "gen-mdp")?;
            write_json(out, &config.mdp.generate()?)?;
            outcome.outputs.push(out.to_path_buf());
        }
        Job::Collect { mdp } => {
            let out = require_out(out, "collect")?;
            let mdp = read_mdp(mdp)?;
            let d = &config.data;
            let data = collect(&mdp, &d.behavior, d.n, d.seed, d.step_rewards)?;
            write_dataset(out, &data)?;
            outcome.outputs.push(out.to_path_buf());
        }
        Job::Solve { mdp, data: data_path } => {
            let out = require_out(out, "solve")?;
            let mdp = read_mdp(mdp)?;
            let data = read_dataset(data_path)?;
            matching(&mdp, &data, data_path)?;
            let features = mdp.feature_map();
            let settings = config.settings();
            let (n, seed) = (data.len(), data.header().seed);
            let file = match config.solver.kind {
                SolverKind::PartedLinear => {
                    SolutionFile::from_linear(n, seed, solve_linear_parted(&data, &features, &settings.linear)?)
                }
                SolverKind::PeviOracle => {
                    SolutionFile::from_linear(n, seed, solve_pevi_oracle(&data, &features, &settings.linear)?)
                }
                SolverKind::UniformSplit => {
                    SolutionFile::from_linear(n, seed, solve_uniform_split(&data, &features, &settings.linear)?)
                }
                SolverKind::PartedNeural => {
                    SolutionFile::from_neural(n, seed, solve_neural_parted(&data, &features, &settings.neural)?)
                }
            };
            write_json(out, &file)?;
            outcome.outputs.push(out.to_path_buf());
        }
        Job::Eval { mdp, solution } => {
            let mdp = read_mdp(mdp)?;
            let sol: SolutionFile = read_json(solution)?;
            let est = &sol.estimate;
            if (est.horizon(), est.num_states(), est.num_actions()) != (mdp.horizon, mdp.num_states, mdp.num_actions)
                || est.policy.len() != mdp.horizon
                || est.policy.iter().any(|row| row.len() != mdp.num_states || row.iter().any(|&a| a >= mdp.num_actions))
            {
                return Err(CliError::Validation(format!(
                    "{} does not match the MDP's H, S and A",
                    solution.display()
                )));
            }
            let mut report = evaluate(&mdp, est);
            report.meta = Some(EvalMeta {
                n: sol.n,
                seed: sol.seed,
                solver: sol.solver,
            });
            emit(out, to_json(&report), &mut outcome)?;
        }
        Job::Sweep => {
            let out = require_out(out, "sweep")?;
            let mdp = config.mdp.generate()?;
            let table = run_sweep(&mdp, config, jobs)?;
            write_text(out, &table.to_csv())?;
            let summary = summary_path(out);
            write_json(&summary, &table.summary())?;
            outcome.outputs.extend([out.to_path_buf(), summary]);
            if !table.failures.is_empty() {
                outcome.failure = Some(format!("{} sweep cells failed", table.failures.len()));
            }
        }
        Job::CalibrateBeta => {
            let mdp = config.mdp.generate()?;
            let d = &config.data;
            let datasets = (0..config.beta.calibration_trials as u64)
                .map(|t| collect(&mdp, &d.behavior, d.n, cell_seed(d.seed, 0, 0, t), false))
                .collect::<Result<Vec<_>, _>>()?;
            let cal = calibrate_theorem2(&mdp, &datasets, &config.settings().linear, &config.beta.calibration)?;
            emit(out, to_json(&cal), &mut outcome)?;
        }
        Job::Check { mdp, data, threshold } => {
            let mdp: LinearMdp = read_json(mdp)?;
            let validation = validate_mdp(&mdp);
            let coverage = match (data, validation.passed) {
                (Some(path), true) => {
                    let data = read_dataset(path)?;
                    matching(&mdp, &data, path)?;
                    Some(coverage_diagnostics(&mdp.feature_map(), &data, threshold.unwrap_or(0.0))?)
                }
                _ => None,
            };
            let mut problems = Vec::new();
            if !validation.passed {
                problems.push(format!("MDP violates its invariants by {}", validation.max_violation()));
            }
            if let (Some(_), Some(c)) = (threshold, &coverage) {
                if !c.well_explored {
                    problems.push(format!(
                        "coverage below {}: trajectory {}, steps {:?}",
                        c.threshold, c.trajectory_lambda_min, c.step_lambda_min
                    ));
                }
            }
            if !problems.is_empty() {
                outcome.failure = Some(problems.join("; "));
            }
            emit(out, to_json(&CheckReport { validation, coverage }), &mut outcome)?;
        }
    }
    Ok(outcome)
}
