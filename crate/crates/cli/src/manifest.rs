use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use dampwave::model::RunConfig;

use crate::thresholds::{Check, Thresholds};

/// Record of one driver invocation. Contains no timestamps, so identical
/// configurations produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentManifest {
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    /// Output files per stage, relative to the output directory.
    pub outputs: BTreeMap<String, Vec<String>>,
    pub tolerances: Thresholds,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    /// Stage that stopped the run, with its error message.
    pub failure: Option<(String, String)>,
}

/// SHA-256 of the canonical TOML form of `cfg`.
pub fn config_hash(cfg: &RunConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl ExperimentManifest {
    pub fn new(cfg: &RunConfig, tolerances: &Thresholds) -> Self {
        let versions = BTreeMap::from([
            ("dampwave-core".to_string(), dampwave::VERSION.to_string()),
            ("dampwave-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        Self {
            config_hash: config_hash(cfg),
            versions,
            outputs: BTreeMap::new(),
            tolerances: tolerances.clone(),
            config: cfg.clone(),
            checks: Vec::new(),
            failure: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.checks.iter().all(|c| c.pass)
    }

    /// Writes `manifest.json` and `summary.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(dir.join("manifest.json"), json + "\n")?;
        fs::write(dir.join("summary.txt"), self.summary())
    }

    pub fn summary(&self) -> String {
        let mut out = format!("beta = {}  config {}\n", self.config.beta, &self.config_hash[..12]);
        for c in &self.checks {
            out.push_str(&format!("{c}\n"));
        }
        if let Some((stage, msg)) = &self.failure {
            out.push_str(&format!("ERROR {stage}: {msg}\n"));
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        out.push_str(&format!(
            "{} checks, {} failed{}\n",
            self.checks.len(),
            failed,
            if self.failure.is_some() { ", run stopped early" } else { "" }
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_config_only() {
        let a = RunConfig::default();
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&a.with_beta(2.0)));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
