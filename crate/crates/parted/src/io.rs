//! JSON documents for MDPs, solutions, reports and checkpoints, plus the
//! line-oriented dataset format.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use parted_core::dataset::{DatasetHeader, OfflineDataset, TrajectoryRecord};
use parted_core::linear::{LinearPartedSolution, SolverKind, Warning};
use parted_core::mdp::LinearMdp;
use parted_core::neural::{NetworkCheckpoint, NeuralPartedSolution};
use parted_core::pessimism::ValueEstimate;

use crate::error::{CliError, CliResult};

/// Parses JSON, reporting the key path of the first offending value.
pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            e.inner().to_string()
        } else {
            format!("at `{path}`: {}", e.inner())
        }
    })?;
    de.end().map_err(|e| e.to_string())?;
    Ok(value)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    from_json_str(&read_text(path)?).map_err(|m| CliError::parse(path, m))
}

fn create(path: &Path) -> CliResult<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| CliError::io(path, e))?))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("in-memory values serialize");
    text.push('\n');
    text
}

/// Pretty JSON. Floats are written in shortest round-trip form, so reading
/// the file back restores every value bit for bit.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &to_json(value))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io(path, e))
}

pub fn read_mdp(path: &Path) -> CliResult<LinearMdp> {
    let mdp: LinearMdp = read_json(path)?;
    mdp.check_shape().map_err(|e| CliError::parse(path, e))?;
    Ok(mdp)
}

/// Header line, then one JSON object per trajectory.
pub fn write_dataset(path: &Path, dataset: &OfflineDataset) -> CliResult<()> {
    let mut out = create(path)?;
    let mut line = |value: String| writeln!(out, "{value}").map_err(|e| CliError::io(path, e));
    line(serde_json::to_string(dataset.header()).expect("header serializes"))?;
    for rec in dataset.records() {
        line(serde_json::to_string(rec).expect("record serializes"))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_dataset(path: &Path) -> CliResult<OfflineDataset> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut header: Option<DatasetHeader> = None;
    let mut records: Vec<TrajectoryRecord> = Vec::new();
    while let Some((i, line)) = lines.next() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |m: String| CliError::parse(path, format!("line {}: {m}", i + 1));
        if header.is_none() {
            header = Some(from_json_str(&line).map_err(at)?);
        } else {
            records.push(from_json_str(&line).map_err(at)?);
        }
    }
    let header = header.ok_or_else(|| CliError::parse(path, "missing header line"))?;
    OfflineDataset::new(header, records).map_err(|e| CliError::parse(path, e))
}

/// Exported solver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub solver: SolverKind,
    #[serde(rename = "N")]
    pub n: usize,
    /// Seed the dataset was collected with.
    pub seed: u64,
    /// Per-step reward weights; their concatenation is `Θ̂`. Linear solvers only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_weights: Option<Vec<Vec<f64>>>,
    /// `ŵ_h`. Linear solvers only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition_weights: Option<Vec<Vec<f64>>>,
    /// Network solver only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<NetworkCheckpoint>,
    pub warnings: Vec<Warning>,
    pub estimate: ValueEstimate,
}

impl SolutionFile {
    pub fn from_linear(n: usize, seed: u64, sol: LinearPartedSolution) -> Self {
        Self {
            solver: sol.solver,
            n,
            seed,
            reward_weights: Some(sol.reward_weights),
            transition_weights: Some(sol.transition_weights),
            checkpoint: None,
            warnings: sol.warnings,
            estimate: sol.estimate,
        }
    }

    pub fn from_neural(n: usize, seed: u64, sol: NeuralPartedSolution) -> Self {
        Self {
            solver: SolverKind::PartedNeural,
            n,
            seed,
            reward_weights: None,
            transition_weights: None,
            checkpoint: Some(sol.checkpoint()),
            warnings: sol.warnings,
            estimate: sol.estimate,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| CliError::io(path, e))?))
}
