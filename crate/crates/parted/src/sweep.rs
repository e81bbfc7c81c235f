//! Parallel sweeps over solvers, dataset sizes and trials.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use parted_core::evaluation::{iqr, loglog_slope, mean, median};
use parted_core::experiment::{run_cell, CellResult};
use parted_core::linear::SolverKind;
use parted_core::mdp::LinearMdp;
use parted_core::seed::cell_seed;

use crate::config::Config;
use crate::error::{CliError, CliResult};

pub const CSV_COLUMNS: [&str; 14] = [
    "solver",
    "N",
    "seed",
    "subopt",
    "vstar",
    "vpi",
    "min_delta",
    "max_delta",
    "decomp_residual",
    "beta1",
    "beta2",
    "lambda_min_r",
    "lambda_min_v",
    "wall_ms",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub solver: SolverKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub solver: SolverKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub cells: usize,
    pub median: f64,
    pub mean: f64,
    pub iqr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSlope {
    pub solver: SolverKind,
    /// Least-squares slope of `ln median SubOpt` against `ln N`.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub aggregates: Vec<Aggregate>,
    pub slopes: Vec<SolverSlope>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    /// Sorted by `(solver, N, seed)`.
    pub rows: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Cell {
    solver: SolverKind,
    n: usize,
    seed: u64,
}

fn cells(config: &Config) -> Vec<Cell> {
    let s = &config.sweep;
    let mut out = Vec::with_capacity(s.solvers.len() * s.n_grid.len() * s.trials);
    for &solver in &s.solvers {
        for (n_index, &n) in s.n_grid.iter().enumerate() {
            for trial in 0..s.trials {
                out.push(Cell {
                    solver,
                    n,
                    seed: cell_seed(s.master_seed, solver.index() as u64, n_index as u64, trial as u64),
                });
            }
        }
    }
    out
}

pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Runs every `(solver, N, trial)` cell on a pool of `jobs` workers. Failed
/// cells are recorded and the sweep continues.
pub fn run_sweep(mdp: &LinearMdp, config: &Config, jobs: usize) -> CliResult<SweepTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    let settings = config.settings();
    let mut cells = cells(config);
    cells.sort();
    let outcomes: Vec<(Cell, Result<CellResult, String>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| {
                let start = Instant::now();
                let result = run_cell(
                    mdp,
                    cell.solver,
                    &config.data.behavior,
                    cell.n,
                    cell.seed,
                    &settings,
                    config.data.step_rewards,
                )
                .map(|out| {
                    let mut row = out.row;
                    if config.sweep.timing {
                        row.wall_ms = start.elapsed().as_millis() as u64;
                    }
                    row
                })
                .map_err(|e| e.to_string());
                (cell, result)
            })
            .collect()
    });
    let mut table = SweepTable {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (cell, result) in outcomes {
        match result {
            Ok(row) => table.rows.push(row),
            Err(error) => table.failures.push(CellFailure {
                solver: cell.solver,
                n: cell.n,
                seed: cell.seed,
                error,
            }),
        }
    }
    Ok(table)
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let mut record = vec![r.solver.tag().to_string(), r.n.to_string(), r.seed.to_string()];
            record.extend(
                [
                    r.subopt,
                    r.vstar,
                    r.vpi,
                    r.min_delta,
                    r.max_delta,
                    r.decomp_residual,
                    r.beta1,
                    r.beta2,
                    r.lambda_min_r,
                    r.lambda_min_v,
                ]
                .map(format_float),
            );
            record.push(r.wall_ms.to_string());
            w.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn summary(&self) -> SweepSummary {
        let mut aggregates = Vec::new();
        let mut slopes = Vec::new();
        let mut solvers: Vec<SolverKind> = self.rows.iter().map(|r| r.solver).collect();
        solvers.dedup();
        for solver in solvers {
            let mut grid: Vec<usize> = self.rows.iter().filter(|r| r.solver == solver).map(|r| r.n).collect();
            grid.dedup();
            let (mut xs, mut ys) = (Vec::new(), Vec::new());
            for n in grid {
                let v: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.solver == solver && r.n == n)
                    .map(|r| r.subopt)
                    .collect();
                let agg = Aggregate {
                    solver,
                    n,
                    cells: v.len(),
                    median: median(&v).unwrap_or(f64::NAN),
                    mean: mean(&v).unwrap_or(f64::NAN),
                    iqr: iqr(&v).unwrap_or(f64::NAN),
                };
                xs.push(n as f64);
                ys.push(agg.median);
                aggregates.push(agg);
            }
            slopes.push(SolverSlope {
                solver,
                slope: loglog_slope(&xs, &ys),
            });
        }
        SweepSummary {
            aggregates,
            slopes,
            failures: self.failures.clone(),
        }
    }
}
