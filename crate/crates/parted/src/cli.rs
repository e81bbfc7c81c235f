use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use parted_core::linear::SolverKind;
use parted_core::neural::FitMode;
use parted_core::pessimism::ClipMode;

use crate::config::{Config, Overrides};
use crate::error::{CliError, CliResult};
use crate::io::to_json;
use crate::manifest::{replay, run_recorded, Manifest};
use crate::pipeline::Job;
use crate::sweep::default_jobs;

pub const STEP_REWARDS_ENV: &str = "PARTED_DEBUG_STEP_REWARDS";

#[derive(Debug, Parser)]
#[command(name = "parted", version, about = "Offline RL from trajectory returns: generate, collect, solve, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    PartedLinear,
    PartedNeural,
    PeviOracle,
    UniformSplit,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::PartedLinear => SolverKind::PartedLinear,
            SolverArg::PartedNeural => SolverKind::PartedNeural,
            SolverArg::PeviOracle => SolverKind::PeviOracle,
            SolverArg::UniformSplit => SolverKind::UniformSplit,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClipArg {
    PerStep,
    Flat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Gd,
    Ntk,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file. A manifest is written alongside as `<out>.manifest.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// MDP seed for gen-mdp, data seed for collect and calibrate-beta,
    /// network seed for solve, master seed for sweep.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    /// Number of trajectories; a comma-separated grid for sweep.
    #[arg(long = "N", value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, requires = "beta2")]
    beta1: Option<f64>,
    #[arg(long, requires = "beta1")]
    beta2: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long, value_enum)]
    clip: Option<ClipArg>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Worker threads for sweep.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random linear MDP.
    GenMdp {
        #[command(flatten)]
        common: Common,
    },
    /// Roll out the behavior policy and write a dataset.
    Collect {
        #[arg(long)]
        mdp: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit a solver to a dataset.
    Solve {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Exact suboptimality and error decomposition of a solution.
    Eval {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Collect, solve and evaluate over a grid; writes CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Smallest penalty constants meeting the pessimism target.
    CalibrateBeta {
        #[command(flatten)]
        common: Common,
    },
    /// Validate an MDP and, optionally, the coverage of a dataset.
    Check {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Fail unless every coverage eigenvalue exceeds this.
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Print the resolved config.
    Config {
        #[command(flatten)]
        common: Common,
    },
    /// Re-run a manifest and compare outputs byte for byte.
    Replay {
        manifest: PathBuf,
        /// Write outputs here instead of their recorded paths.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn resolve(common: &Common, seed_target: impl FnOnce(&mut Config, u64)) -> CliResult<Config> {
    let mut config = match &common.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = common.seed {
        seed_target(&mut config, seed);
    }
    Overrides {
        solver: common.solver.map(Into::into),
        n: common.n.clone(),
        beta: common.beta1.zip(common.beta2),
        lambda1: common.lambda1,
        lambda2: common.lambda2,
        clip: common.clip.map(|c| match c {
            ClipArg::PerStep => ClipMode::PerStep,
            ClipArg::Flat => ClipMode::Flat,
        }),
        mode: common.mode.map(|m| match m {
            ModeArg::Gd => FitMode::Gd,
            ModeArg::Ntk => FitMode::Ntk,
        }),
        jobs: common.jobs,
        step_rewards: std::env::var(STEP_REWARDS_ENV).is_ok_and(|v| v == "1"),
    }
    .apply(&mut config)?;
    Ok(config)
}

fn single_n(common: &Common, job: &str) -> CliResult<()> {
    if common.n.len() > 1 {
        return Err(CliError::Usage(format!("{job} takes a single --N")));
    }
    Ok(())
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> CliResult<()> {
    let (job, config, common) = match command {
        Command::GenMdp { common } => (Job::GenMdp, resolve(&common, |c, s| c.mdp.seed = s)?, common),
        Command::Collect { mdp, common } => {
            single_n(&common, "collect")?;
            (Job::Collect { mdp }, resolve(&common, |c, s| c.data.seed = s)?, common)
        }
        Command::Solve { mdp, data, common } => {
            (Job::Solve { mdp, data }, resolve(&common, |c, s| c.solver.neural.net_seed = s)?, common)
        }
        Command::Eval { mdp, solution, common } => (Job::Eval { mdp, solution }, resolve(&common, |_, _| {})?, common),
        Command::Sweep { common } => (Job::Sweep, resolve(&common, |c, s| c.sweep.master_seed = s)?, common),
        Command::CalibrateBeta { common } => {
            single_n(&common, "calibrate-beta")?;
            (Job::CalibrateBeta, resolve(&common, |c, s| c.data.seed = s)?, common)
        }
        Command::Check {
            mdp,
            data,
            threshold,
            common,
        } => (Job::Check { mdp, data, threshold }, resolve(&common, |_, _| {})?, common),
        Command::Config { common } => {
            let config = resolve(&common, |_, _| {})?;
            let text = to_json(&config);
            return match &common.out {
                Some(path) => crate::io::write_text(path, &text),
                None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
            };
        }
        Command::Replay { manifest, out_dir, jobs } => {
            let loaded = Manifest::load(&manifest)?;
            let jobs = jobs.or(loaded.config.sweep.jobs).unwrap_or_else(default_jobs);
            let report = replay(&loaded, out_dir.as_deref(), jobs)?;
            if !report.mismatched.is_empty() {
                let list: Vec<String> = report.mismatched.iter().map(|p| p.display().to_string()).collect();
                return Err(CliError::Validation(format!("outputs differ: {}", list.join(", "))));
            }
            for p in &report.outputs {
                writeln!(stdout, "reproduced {}", p.display()).map_err(|e| CliError::io("<stdout>", e))?;
            }
            return Ok(());
        }
    };
    let jobs = config.sweep.jobs.unwrap_or_else(default_jobs);
    let outcome = run_recorded(&job, &config, common.out.as_deref(), jobs)?;
    if let Some(text) = &outcome.stdout {
        stdout.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))?;
    }
    match outcome.failure {
        Some(why) => Err(CliError::Validation(why)),
        None => Ok(()),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code: 0 on success, 1 on validation failure, 2 on I/O, config or
/// usage errors.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                2
            } else {
                let _ = write!(stdout, "{}", e.render());
                0
            };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

/// Convenience for tests: the run's exit code and captured output.
pub fn run_captured<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(args, &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}
