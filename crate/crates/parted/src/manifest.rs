//! Run manifests: everything needed to regenerate a command's outputs, plus
//! digests to confirm that a replay matched byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::io::{file_sha256, read_json, write_json};
use crate::pipeline::{execute, Job, NamedSeed, Outcome};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub job: Job,
    /// Fully resolved, with command-line overrides folded in.
    pub config: Config,
    pub seeds: Vec<NamedSeed>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn digests(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.clone(),
                sha256: file_sha256(p)?,
            })
        })
        .collect()
}

impl Manifest {
    /// Digests inputs before the run and outputs after it.
    pub fn record(job: &Job, config: &Config, inputs: Vec<FileDigest>, outcome: &Outcome) -> CliResult<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            job: job.clone(),
            config: config.clone(),
            seeds: job.seeds(config),
            inputs,
            outputs: digests(&outcome.outputs)?,
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        read_json(path)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }
}

/// Runs `job`, then writes a manifest next to its first output.
pub fn run_recorded(job: &Job, config: &Config, out: Option<&Path>, jobs: usize) -> CliResult<Outcome> {
    let inputs = digests(&job.inputs())?;
    let outcome = execute(job, config, out, jobs)?;
    if let Some(first) = outcome.outputs.first() {
        Manifest::record(job, config, inputs, &outcome)?.save(&manifest_path(first))?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub outputs: Vec<PathBuf>,
    /// Outputs whose digest differs from the manifest.
    pub mismatched: Vec<PathBuf>,
}

/// Re-runs a manifest. Outputs go to their recorded paths, or into
/// `out_dir` under their recorded file names. Inputs must still match.
pub fn replay(manifest: &Manifest, out_dir: Option<&Path>, jobs: usize) -> CliResult<ReplayReport> {
    if manifest.version != env!("CARGO_PKG_VERSION") {
        return Err(CliError::Validation(format!(
            "manifest was written by version {}, this is {}",
            manifest.version,
            env!("CARGO_PKG_VERSION")
        )));
    }
    manifest.config.validate()?;
    for input in &manifest.inputs {
        if file_sha256(&input.path)? != input.sha256 {
            return Err(CliError::Validation(format!("input {} has changed", input.path.display())));
        }
    }
    let relocate = |p: &Path| match out_dir {
        Some(dir) => dir.join(p.file_name().unwrap_or(p.as_os_str())),
        None => p.to_path_buf(),
    };
    let out = manifest.outputs.first().map(|o| relocate(&o.path));
    let outcome = execute(&manifest.job, &manifest.config, out.as_deref(), jobs)?;
    let mut mismatched = Vec::new();
    if outcome.outputs.len() != manifest.outputs.len() {
        mismatched.extend(outcome.outputs.iter().cloned());
    } else {
        for (path, expected) in outcome.outputs.iter().zip(&manifest.outputs) {
            if file_sha256(path)? != expected.sha256 {
                mismatched.push(path.clone());
            }
        }
    }
    Ok(ReplayReport {
        outputs: outcome.outputs,
        mismatched,
    })
}
