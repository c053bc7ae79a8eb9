//! The optional `--config` file.
//!
//! One TOML (or JSON) document may carry every section:
//!
//! ```toml
//! [datasets.titanic]          # dataset entries, as in datasets.toml
//! source = { url = "...", expected_checksum = "..." }
//! task = { target_column = "Survived", positive_label = "1" }
//!
//! [pipeline]                  # evaluation pipeline
//! top_k = 50
//!
//! [run]                       # defaults for `scrub run`
//! dataset = "titanic"
//! agent = { type = "llm", endpoint = "", model = "gpt-4o" }
//!
//! [report]
//! thresholds = [50000, 100000, 200000]
//! ```

use std::fs;
use std::path::Path;

use scrub_core::agent::RunConfig;
use scrub_core::pipeline::PipelineConfig;
use scrub_core::provision::DatasetsFile;
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ReportSection {
    #[serde(default)]
    pub thresholds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct CliConfig {
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub run: Option<RunConfig>,
    #[serde(default)]
    pub report: ReportSection,
    #[serde(skip)]
    pub datasets: DatasetsFile,
}

impl CliConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(CliConfig::default()) };
        let text = fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("cannot read config {}: {e}", path.display())))?;
        let bad = |e: String| CliError::Invalid(format!("config {}: {e}", path.display()));
        let is_json = path.extension().is_some_and(|e| e == "json");
        let mut config: CliConfig =
            if is_json { serde_json::from_str(&text).map_err(|e| bad(e.to_string()))? } else { toml::from_str(&text).map_err(|e| bad(e.to_string()))? };
        // Dataset entries resolve relative paths against the config's directory.
        config.datasets = if is_json {
            let file: DatasetsFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
            file
        } else {
            DatasetsFile::load(path).map_err(|e| bad(e.to_string()))?
        };
        Ok(config)
    }
}
