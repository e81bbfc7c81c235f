//! Search for the smallest penalty constants that keep the value estimates
//! pessimistic on a given collection of datasets.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::OfflineDataset;
use crate::error::{Error, Result};
use crate::evaluation::evaluate;
use crate::linear::{solve_linear_parted, LinearBeta, LinearPartedConfig};
use crate::mdp::LinearMdp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSettings {
    /// Fraction of datasets on which pessimism must hold.
    pub target_rate: f64,
    /// Slack in `δ_h(s,a) ≥ −tolerance`.
    pub tolerance: f64,
    pub delta: f64,
    /// `c_beta2 = ratio · c_beta1`.
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    /// Bisection steps in log space.
    pub steps: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            target_rate: 0.9,
            tolerance: 1e-10,
            delta: 0.1,
            ratio: 1.0,
            lower: 1e-5,
            upper: 1.0,
            steps: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub c_beta1: f64,
    pub c_beta2: f64,
    pub rate: f64,
    /// Every `(c_beta1, rate)` probed, in order.
    pub probes: Vec<(f64, f64)>,
}

impl Calibration {
    pub fn beta(&self, delta: f64) -> LinearBeta {
        LinearBeta::Theorem2 {
            c_beta1: self.c_beta1,
            c_beta2: self.c_beta2,
            delta,
        }
    }
}

/// Fraction of `datasets` on which `δ_h(s,a) ≥ −tolerance` everywhere.
pub fn pessimism_rate(
    mdp: &LinearMdp,
    datasets: &[OfflineDataset],
    config: &LinearPartedConfig,
    tolerance: f64,
) -> Result<f64> {
    if datasets.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let features = mdp.feature_map();
    let mut held = 0usize;
    for data in datasets {
        let sol = solve_linear_parted(data, &features, config)?;
        if evaluate(mdp, &sol.estimate).pessimism_holds(tolerance) {
            held += 1;
        }
    }
    Ok(held as f64 / datasets.len() as f64)
}

/// Bisects `c` in `[lower, upper]` (log scale) for the smallest
/// `c_beta1 = c`, `c_beta2 = ratio·c` meeting the target rate. The rate is
/// assumed to be non-decreasing in `c`; the returned value always passes.
pub fn calibrate_theorem2(
    mdp: &LinearMdp,
    datasets: &[OfflineDataset],
    base: &LinearPartedConfig,
    settings: &CalibrationSettings,
) -> Result<Calibration> {
    let CalibrationSettings {
        target_rate,
        tolerance,
        delta,
        ratio,
        lower,
        upper,
        steps,
    } = *settings;
    if !(lower > 0.0 && upper > lower && ratio >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "calibration",
            reason: format!("need 0 < lower < upper and ratio >= 0, got {lower}, {upper}, {ratio}"),
        });
    }
    let mut probes = Vec::new();
    let mut rate_at = |c: f64| -> Result<f64> {
        let config = LinearPartedConfig {
            beta: LinearBeta::Theorem2 {
                c_beta1: c,
                c_beta2: ratio * c,
                delta,
            },
            ..base.clone()
        };
        let rate = pessimism_rate(mdp, datasets, &config, tolerance)?;
        probes.push((c, rate));
        Ok(rate)
    };
    let upper_rate = rate_at(upper)?;
    if upper_rate < target_rate {
        return Err(Error::InvalidParameter {
            name: "calibration",
            reason: format!("upper bound {upper} reaches only rate {upper_rate}"),
        });
    }
    let (mut lo, mut hi, mut hi_rate) = (libm::log(lower), libm::log(upper), upper_rate);
    let lower_rate = rate_at(lower)?;
    if lower_rate >= target_rate {
        hi = lo;
        hi_rate = lower_rate;
    } else {
        for _ in 0..steps {
            let mid = 0.5 * (lo + hi);
            let rate = rate_at(libm::exp(mid))?;
            if rate >= target_rate {
                hi = mid;
                hi_rate = rate;
            } else {
                lo = mid;
            }
        }
    }
    let c = libm::exp(hi);
    Ok(Calibration {
        c_beta1: c,
        c_beta2: ratio * c,
        rate: hi_rate,
        probes,
    })
}
