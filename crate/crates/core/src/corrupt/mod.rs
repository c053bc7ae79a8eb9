//! Seeded, declarative corruption of a clean training table.
//!
//! A [`CorruptionRecipe`] is an ordered list of [`CorruptionStep`]s. Each step
//! selects rows with a [`RowPredicate`], optionally samples a fraction of them
//! from its own named random substream, and rewrites one column. Every write
//! lands in a [`GroundTruthLog`] so the clean table can be recovered exactly
//! with [`invert`].

mod apply;
mod log;
pub mod recipes;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predicate::{PredicateError, RowPredicate};
use crate::table::TableError;

pub use apply::{apply_recipe, apply_step, invert, quantile};
pub use log::{GroundTruthLog, LogEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    NumericalShift,
    NanCorruption,
    CategoricalShift,
}

/// What a step does to each selected cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Add { value: f64 },
    Multiply { value: f64 },
    /// Uniform draw in `[lo, hi]`.
    ResampleRange { lo: f64, hi: f64 },
    /// Uniform draw between two quantiles of the column as it was before
    /// this step ran.
    ResampleQuantileBand { q_lo: f64, q_hi: f64 },
    /// Multiply by `factor^(key - base)` (or by `factor` once when
    /// `compounding` is false), where `key` is read from `key_column`.
    CompoundYearly {
        key_column: String,
        base: f64,
        factor: f64,
        #[serde(default = "yes")]
        compounding: bool,
    },
    SetMissing,
    Replace { value: String },
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

impl Action {
    pub fn kind(&self) -> CorruptionKind {
        match self {
            Action::SetMissing => CorruptionKind::NanCorruption,
            Action::Replace { .. } => CorruptionKind::CategoricalShift,
            _ => CorruptionKind::NumericalShift,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionStep {
    pub kind: CorruptionKind,
    #[serde(rename = "where", default)]
    pub predicate: RowPredicate,
    pub target_column: String,
    /// Share of matching rows to mutate; `floor(fraction * matches)` rows
    /// are drawn without replacement.
    #[serde(default = "one")]
    pub fraction: f64,
    pub action: Action,
    pub stream_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionRecipe {
    #[serde(default)]
    pub name: String,
    pub master_seed: u64,
    #[serde(default)]
    pub weak_hint: String,
    #[serde(default)]
    pub strong_hint: String,
    #[serde(default)]
    pub steps: Vec<CorruptionStep>,
}

impl CorruptionRecipe {
    pub fn empty(master_seed: u64) -> Self {
        CorruptionRecipe {
            name: String::new(),
            master_seed,
            weak_hint: String::new(),
            strong_hint: String::new(),
            steps: Vec::new(),
        }
    }

    pub fn from_toml(s: &str) -> Result<Self, CorruptError> {
        toml::from_str(s).map_err(|e| CorruptError::RecipeFormat(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, CorruptError> {
        serde_json::from_str(s).map_err(|e| CorruptError::RecipeFormat(e.to_string()))
    }

    /// Load a `.toml` or `.json` recipe file, chosen by extension.
    pub fn load(path: &Path) -> Result<Self, CorruptError> {
        let text = fs::read_to_string(path).map_err(|e| CorruptError::RecipeFormat(format!("{}: {e}", path.display())))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text),
            _ => Self::from_toml(&text),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("recipe is always representable as toml")
    }
}

#[derive(Debug, Error)]
pub enum CorruptError {
    #[error("invalid step `{label}`: {reason}")]
    InvalidStep { label: String, reason: String },
    #[error("step `{label}`: column `{column}` has no values to take quantiles of")]
    EmptyColumn { label: String, column: String },
    #[error("step `{label}`: {source}")]
    Predicate { label: String, source: PredicateError },
    #[error("ground-truth log does not match table: {0}")]
    LogMismatch(String),
    #[error("recipe format: {0}")]
    RecipeFormat(String),
    #[error(transparent)]
    Table(#[from] TableError),
}
