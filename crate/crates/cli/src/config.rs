//! Flat TOML configuration. Every key is optional and unknown keys are
//! rejected.

use std::fs;
use std::path::{Path, PathBuf};

use pgo_core::adaptive::AdaptiveConfig;
use pgo_core::cct::PathMapping;
use pgo_core::detect::{DetectorConfig, Report};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const CONFIG_ENV: &str = "PGO_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CollectorMode {
    Dir,
    Http,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectorConfig {
    pub mode: CollectorMode,
    pub location: String,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        CollectorConfig {
            mode: CollectorMode::Dir,
            location: "pgo-batches".into(),
        }
    }
}

/// Which modules `optimize` defers for a finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// Whole library for unused/infrequent findings, cold sub-packages for
    /// partial ones.
    #[default]
    Auto,
    Library,
    Subpackages,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub app_root: Option<String>,
    pub library_roots: Vec<String>,
    pub sampling_hz: f64,
    pub gate_threshold: f64,
    pub utilization_threshold: f64,
    pub min_init_share: f64,
    pub epsilon: f64,
    pub window_ms: i64,
    pub denylist: Vec<String>,
    pub defer_granularity: Granularity,
    pub collector: CollectorConfig,
}

impl Default for Config {
    fn default() -> Self {
        let detector = DetectorConfig::default();
        let adaptive = AdaptiveConfig::default();
        Config {
            app_root: None,
            library_roots: PathMapping::default().library_roots,
            sampling_hz: 100.0,
            gate_threshold: detector.gate_threshold,
            utilization_threshold: detector.utilization_threshold,
            min_init_share: detector.min_init_share,
            epsilon: adaptive.epsilon,
            window_ms: adaptive.window_ms,
            denylist: Vec::new(),
            defer_granularity: Granularity::Auto,
            collector: CollectorConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str, origin: &str) -> Result<Config> {
        let cfg: Config = toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_string(),
            message: e.message().to_string(),
        })?;
        cfg.validate().map_err(|message| CliError::Config {
            path: origin.to_string(),
            message,
        })?;
        Ok(cfg)
    }

    /// Reads `path`, falling back to `$PGO_CONFIG`, falling back to defaults.
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let path: Option<PathBuf> = path.map(Path::to_path_buf).or_else(|| {
            std::env::var_os(CONFIG_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        });
        match path {
            None => Ok(Config::default()),
            Some(p) => {
                let text = fs::read_to_string(&p).map_err(|e| CliError::Config {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?;
                Config::from_toml(&text, &p.display().to_string())
            }
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        for (name, v) in [
            ("gate_threshold", self.gate_threshold),
            ("utilization_threshold", self.utilization_threshold),
            ("min_init_share", self.min_init_share),
            ("epsilon", self.epsilon),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if !(1.0..=1000.0).contains(&self.sampling_hz) {
            return Err(format!("sampling_hz must lie in [1, 1000], got {}", self.sampling_hz));
        }
        if self.window_ms < 60_000 {
            return Err(format!("window_ms must be at least 60000, got {}", self.window_ms));
        }
        if self.library_roots.iter().any(|r| r.trim().is_empty()) {
            return Err("library_roots entries must be non-empty".into());
        }
        Ok(())
    }

    pub fn mapping(&self) -> PathMapping {
        let mut m = PathMapping {
            app_root: None,
            library_roots: self.library_roots.clone(),
        };
        if let Some(root) = &self.app_root {
            m = m.with_app_root(root.clone());
        }
        m
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            utilization_threshold: self.utilization_threshold,
            min_init_share: self.min_init_share,
            gate_threshold: self.gate_threshold,
        }
    }

    pub fn adaptive(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            window_ms: self.window_ms,
            epsilon: self.epsilon,
        }
    }

    /// SHA-256 of the canonical JSON form, recorded in run manifests.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Modules to defer for `report` under the configured granularity.
    pub fn deferral_targets(&self, report: &Report) -> Vec<String> {
        let mut out: Vec<String> = match self.defer_granularity {
            Granularity::Auto => return report.deferral_targets(),
            Granularity::Library => report.findings.iter().map(|f| f.library.to_string()).collect(),
            Granularity::Subpackages => report
                .findings
                .iter()
                .flat_map(|f| {
                    if f.flagged_subpackages.is_empty() {
                        vec![f.library.to_string()]
                    } else {
                        f.flagged_subpackages.iter().map(|s| s.name.clone()).collect()
                    }
                })
                .collect(),
        };
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = Config::default();
        c.validate().unwrap();
        assert_eq!(c.sampling_hz, 100.0);
        assert_eq!(c.window_ms, 43_200_000);
        assert_eq!(c.epsilon, 0.002);
    }

    #[test]
    fn parses_every_key() {
        let text = r#"
app_root = "/var/task"
library_roots = ["site-packages", "vendor"]
sampling_hz = 250
gate_threshold = 0.2
utilization_threshold = 0.05
min_init_share = 0.1
epsilon = 0.01
window_ms = 3600000
denylist = ["codecs_plugin"]
defer_granularity = "library"
collector = { mode = "http", location = "http://127.0.0.1:8700" }
"#;
        let c = Config::from_toml(text, "t.toml").unwrap();
        assert_eq!(c.app_root.as_deref(), Some("/var/task"));
        assert_eq!(c.collector.mode, CollectorMode::Http);
        assert_eq!(c.defer_granularity, Granularity::Library);
        assert_eq!(c.window_ms, 3_600_000);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = Config::from_toml("epsilom = 0.1\n", "t.toml").unwrap_err();
        assert!(err.to_string().contains("epsilom"), "{err}");
        assert_eq!(err.exit_code(), crate::error::EXIT_USAGE);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        for text in [
            "gate_threshold = 1.0",
            "epsilon = 0",
            "sampling_hz = 5000",
            "window_ms = 1000",
            "utilization_threshold = -0.1",
        ] {
            assert!(Config::from_toml(text, "t.toml").is_err(), "{text}");
        }
    }

    #[test]
    fn digest_tracks_content() {
        let a = Config::default();
        let mut b = Config::default();
        assert_eq!(a.digest(), b.digest());
        b.epsilon = 0.003;
        assert_ne!(a.digest(), b.digest());
    }
}
