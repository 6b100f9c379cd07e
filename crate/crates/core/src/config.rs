//! TOML configuration: `[tdr]`, `[iro]`, `[po]`, `[backend]`, `[mapping]`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::HttpConfig;
use crate::devicegen::MappingTable;
use crate::iro::IroConfig;
use crate::po::{LabelKind, PriorityTable};
use crate::tdr::TdrConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSection {
    pub kind: BackendKind,
    #[serde(flatten)]
    pub http: HttpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSection {
    pub chunk_chars: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        CorpusSection {
            chunk_chars: crate::pipeline::DEFAULT_CHUNK_CHARS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub tdr: TdrConfig,
    pub iro: IroConfig,
    /// Section label -> tier overrides.
    pub po: BTreeMap<String, u32>,
    pub backend: BackendSection,
    /// Extracted symbol -> card key overrides.
    pub mapping: BTreeMap<String, String>,
    pub corpus: CorpusSection,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.iro.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.priorities()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Config::from_toml_str(&text)
    }

    pub fn priorities(&self) -> Result<PriorityTable, ConfigError> {
        let mut table = PriorityTable::default();
        for (label, tier) in &self.po {
            let kind: LabelKind = label.parse().map_err(ConfigError::Invalid)?;
            table.set(kind, *tier).map_err(ConfigError::Invalid)?;
        }
        Ok(table)
    }

    pub fn mapping_table(&self) -> MappingTable {
        let mut m = MappingTable::default();
        m.apply_overrides(&self.mapping);
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iro::Convergence;
    use crate::po::SectionLabel;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = Config::from_toml_str(
            r#"
[tdr]
max_distance = 3
[iro]
max_iterations = 5
convergence = "Either"
[po]
typical_performance_curves = 1
[backend]
kind = "http"
base_url = "http://localhost:8000"
model = "m"
[mapping]
Ciss = "CGDO"
"#,
        )
        .unwrap();
        assert_eq!(cfg.tdr.max_distance, 3);
        assert_eq!(cfg.tdr.max_recommendations, 5);
        assert_eq!(cfg.iro.max_iterations, 5);
        assert_eq!(cfg.iro.convergence, Convergence::Either);
        assert_eq!(cfg.priorities().unwrap().tier(&SectionLabel::TypicalPerformanceCurves), 1);
        assert_eq!(cfg.backend.kind, BackendKind::Http);
        assert_eq!(cfg.backend.http.model, "m");
        assert_eq!(cfg.mapping_table().key_for("Ciss"), Some("CGDO"));
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(Config::from_toml_str("[iro]\nmax_iterations = 0").is_err());
        assert!(Config::from_toml_str("[po]\nbogus = 1").is_err());
        assert!(Config::from_toml_str("[po]\nthermal = 0").is_err());
        assert!(Config::from_toml_str("[tdr\n").is_err());
    }
}
