use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Pass/fail tolerances for the verification checks, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Relative error of `F(0)` against the Airy closed form at `beta = 1`.
    pub cap_airy_rel: f64,
    pub neumann_harmonic: f64,
    pub neumann_airy: f64,
    /// Half-width of the band around `(beta + 4) / (beta + 2)`.
    pub eigen_exponent: f64,
    /// Largest admissible slope of `log residual` against `log Re q`.
    pub residual_slope_max: f64,
    /// Half-width of the band around `-(beta + 3) / (beta + 2)`.
    pub placement_exponent: f64,
    /// Levels the tail-mass local slopes must exceed in turn.
    pub tail_slopes: Vec<f64>,
    /// Margin around `[1 / (beta + 2), 2 / (beta + 2)]`.
    pub resolvent_margin: f64,
    /// Allowed deviation of the observed convergence order from 2.
    pub undamped_order: f64,
    pub decay_rate_rel: f64,
    pub undamped_drift: f64,
    pub gcc_r2: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            cap_airy_rel: 1e-6,
            neumann_harmonic: 1e-5,
            neumann_airy: 1e-4,
            eigen_exponent: 0.05,
            residual_slope_max: -1.0,
            placement_exponent: 0.05,
            tail_slopes: vec![2.0, 4.0, 6.0],
            resolvent_margin: 0.05,
            undamped_order: 0.2,
            decay_rate_rel: 0.05,
            undamped_drift: 1e-8,
            gcc_r2: 0.99,
        }
    }
}

impl Thresholds {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// One verification outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub stage: String,
    pub name: String,
    pub measured: f64,
    pub target: String,
    pub pass: bool,
}

impl Check {
    pub fn new(stage: &str, name: &str, measured: f64, target: impl Into<String>, pass: bool) -> Self {
        Self {
            stage: stage.into(),
            name: name.into(),
            measured,
            target: target.into(),
            pass,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<10} {:<28} measured {:<14.6e} target {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.stage,
            self.name,
            self.measured,
            self.target
        )
    }
}
