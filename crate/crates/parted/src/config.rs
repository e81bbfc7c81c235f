//! Experiment configuration.
//!
//! A config is one JSON object with optional sections `mdp`, `data`,
//! `solver`, `beta` and `sweep`. Every omitted key takes the default shown by
//! `parted config`; unknown or duplicate keys are errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use parted_core::calibrate::CalibrationSettings;
use parted_core::dataset::BehaviorPolicy;
use parted_core::experiment::SolverSettings;
use parted_core::linear::{LinearBeta, LinearPartedConfig, SolverKind};
use parted_core::mdp::RandomMdpSpec;
use parted_core::neural::{
    Activation, FitMode, NeuralBeta, NeuralPartedConfig, OptimizerConfig, PenaltyPath, PenaltyPoint,
};
use parted_core::pessimism::ClipMode;

use crate::error::{CliError, CliResult};
use crate::io::{from_json_str, read_text};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub mdp: RandomMdpSpec,
    pub data: DataSection,
    pub solver: SolverSection,
    pub beta: BetaSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    #[serde(rename = "N")]
    pub n: usize,
    pub seed: u64,
    pub behavior: BehaviorPolicy,
    /// Keep per-step rewards in the dataset; also switched on by
    /// `PARTED_DEBUG_STEP_REWARDS=1`.
    pub step_rewards: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            n: 200,
            seed: 0,
            behavior: BehaviorPolicy::Uniform,
            step_rewards: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub kind: SolverKind,
    /// `null`: 1 for linear solvers, `1 + 1/N` for the network solver.
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    /// `null`: `per_step` for linear solvers, `flat` for the network solver.
    pub clip: Option<ClipMode>,
    pub neural: NeuralSection,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            kind: SolverKind::PartedLinear,
            lambda1: None,
            lambda2: None,
            clip: None,
            neural: NeuralSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuralSection {
    pub half_width: usize,
    pub net_seed: u64,
    pub activation: Activation,
    pub mode: FitMode,
    pub optimizer: OptimizerConfig,
    pub penalty_point: PenaltyPoint,
    pub penalty_path: PenaltyPath,
    pub dual_threshold: usize,
}

impl Default for NeuralSection {
    fn default() -> Self {
        let base = NeuralPartedConfig::default();
        Self {
            half_width: base.half_width,
            net_seed: base.net_seed,
            activation: base.activation,
            mode: base.mode,
            optimizer: base.optimizer,
            penalty_point: base.penalty_point,
            penalty_path: base.penalty_path,
            dual_threshold: base.dual_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaSection {
    pub linear: LinearBeta,
    pub neural: NeuralBeta,
    pub calibration: CalibrationSettings,
    /// Datasets used by `calibrate-beta`.
    pub calibration_trials: usize,
}

impl Default for BetaSection {
    fn default() -> Self {
        Self {
            linear: LinearBeta::default(),
            neural: NeuralBeta::default(),
            calibration: CalibrationSettings::default(),
            calibration_trials: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub solvers: Vec<SolverKind>,
    pub n_grid: Vec<usize>,
    pub trials: usize,
    pub master_seed: u64,
    /// Worker threads; `null` means one per logical core.
    pub jobs: Option<usize>,
    /// Record `wall_ms`. Off by default because timings are not reproducible.
    pub timing: bool,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            solvers: vec![SolverKind::PartedLinear],
            n_grid: vec![100, 200, 400, 800, 1600],
            trials: 20,
            master_seed: 0,
            jobs: None,
            timing: false,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let config: Config = from_json_str(text).map_err(CliError::Config)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::from_json(&read_text(path)?).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Range checks that serde cannot express.
    pub fn validate(&self) -> CliResult<()> {
        let fail = |key: &str, why: String| Err(CliError::Config(format!("at `{key}`: {why}")));
        let m = &self.mdp;
        for (key, value) in [
            ("mdp.num_states", m.num_states),
            ("mdp.num_actions", m.num_actions),
            ("mdp.horizon", m.horizon),
            ("mdp.feature_dim", m.feature_dim),
            ("data.N", self.data.n),
            ("solver.neural.half_width", self.solver.neural.half_width),
            ("beta.calibration_trials", self.beta.calibration_trials),
            ("sweep.trials", self.sweep.trials),
        ] {
            if value == 0 {
                return fail(key, "must be positive".into());
            }
        }
        if !(m.reward_heterogeneity.is_finite() && (0.0..=1.0).contains(&m.reward_heterogeneity)) {
            return fail("mdp.reward_heterogeneity", format!("{} is outside [0, 1]", m.reward_heterogeneity));
        }
        for (key, value) in [("solver.lambda1", self.solver.lambda1), ("solver.lambda2", self.solver.lambda2)] {
            if let Some(v) = value {
                if !(v > 0.0 && v.is_finite()) {
                    return fail(key, format!("regularization must be positive and finite, got {v}"));
                }
            }
        }
        if let BehaviorPolicy::EpsilonGreedy { epsilon } = self.data.behavior {
            if !(0.0..=1.0).contains(&epsilon) {
                return fail("data.behavior.epsilon", format!("{epsilon} is outside [0, 1]"));
            }
        }
        if let Err(e) = self.beta.linear.resolve(1, 1, 1) {
            return fail("beta.linear", e.to_string());
        }
        match self.beta.neural {
            NeuralBeta::Explicit { beta1, beta2 } if !(beta1 >= 0.0 && beta2 >= 0.0) => {
                return fail("beta.neural", "multipliers must be non-negative".into());
            }
            NeuralBeta::Corollary1 { d1, d2, constant } if !(d1 >= 0.0 && d2 >= 0.0 && constant >= 0.0) => {
                return fail("beta.neural", "d1, d2 and constant must be non-negative".into());
            }
            _ => {}
        }
        if self.sweep.jobs == Some(0) {
            return fail("sweep.jobs", "must be positive".into());
        }
        if self.sweep.solvers.is_empty() {
            return fail("sweep.solvers", "must not be empty".into());
        }
        if self.sweep.n_grid.is_empty() || self.sweep.n_grid.contains(&0) {
            return fail("sweep.n_grid", "must be a non-empty list of positive sizes".into());
        }
        let c = &self.beta.calibration;
        if !(c.lower > 0.0 && c.upper > c.lower) {
            return fail("beta.calibration", "need 0 < lower < upper".into());
        }
        Ok(())
    }

    /// Solver configurations with every `null` resolved for `N` trajectories.
    pub fn settings(&self) -> SolverSettings {
        let s = &self.solver;
        let linear = LinearPartedConfig {
            lambda1: s.lambda1.unwrap_or(1.0),
            lambda2: s.lambda2.unwrap_or(1.0),
            beta: self.beta.linear,
            clip: s.clip.unwrap_or(ClipMode::PerStep),
        };
        let n = &s.neural;
        let neural = NeuralPartedConfig {
            half_width: n.half_width,
            net_seed: n.net_seed,
            activation: n.activation,
            lambda1: s.lambda1,
            lambda2: s.lambda2,
            optimizer: n.optimizer,
            mode: n.mode,
            beta: self.beta.neural,
            penalty_point: n.penalty_point,
            penalty_path: n.penalty_path,
            dual_threshold: n.dual_threshold,
            clip: s.clip.unwrap_or(ClipMode::Flat),
        };
        SolverSettings { linear, neural }
    }
}

/// Command-line overrides, applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub solver: Option<SolverKind>,
    pub n: Vec<usize>,
    pub beta: Option<(f64, f64)>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub clip: Option<ClipMode>,
    pub mode: Option<FitMode>,
    pub jobs: Option<usize>,
    pub step_rewards: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut Config) -> CliResult<()> {
        if let Some(kind) = self.solver {
            config.solver.kind = kind;
            config.sweep.solvers = vec![kind];
        }
        match self.n.as_slice() {
            [] => {}
            [n] => {
                config.data.n = *n;
                config.sweep.n_grid = vec![*n];
            }
            grid => config.sweep.n_grid = grid.to_vec(),
        }
        if let Some((beta1, beta2)) = self.beta {
            config.beta.linear = LinearBeta::Explicit { beta1, beta2 };
            config.beta.neural = NeuralBeta::Explicit { beta1, beta2 };
        }
        config.solver.lambda1 = self.lambda1.or(config.solver.lambda1);
        config.solver.lambda2 = self.lambda2.or(config.solver.lambda2);
        config.solver.clip = self.clip.or(config.solver.clip);
        if let Some(mode) = self.mode {
            config.solver.neural.mode = mode;
        }
        config.sweep.jobs = self.jobs.or(config.sweep.jobs);
        config.data.step_rewards |= self.step_rewards;
        config.validate()
    }
}
