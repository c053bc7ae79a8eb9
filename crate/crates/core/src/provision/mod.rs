//! Turning raw data into a benchmark bundle: task definition, stratified
//! split, protected index, and the built-in recipe registry.

mod config;
mod fetch;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corrupt::{recipes, CorruptionRecipe};
use crate::csv_io::{to_csv_bytes, CsvError};
use crate::rng::Substream;
use crate::table::{Cell, Table, TableError, DEFAULT_INDEX_COLUMN};

pub use config::{DatasetEntry, DatasetsFile};
pub use fetch::{cache_dir_from_env, fetch_dataset, sha256_hex, SourceDescriptor, CACHE_ENV};
pub use synthetic::{generate_synthetic, CategoricalFeature, NumericFeature, SyntheticSpec};

#[derive(Debug, Error)]
pub enum ProvisionError {
    #[error("target column `{0}` not found")]
    MissingTarget(String),
    #[error("target column `{0}` has fewer than two classes")]
    DegenerateTarget(String),
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("unknown dataset `{0}`")]
    UnknownDataset(String),
    #[error("download of {url} failed: {reason}")]
    DownloadFailed { url: String, reason: String },
    #[error("checksum mismatch for {path}: expected {expected}, got {actual}")]
    ChecksumMismatch { path: String, expected: String, actual: String },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

fn default_split() -> f64 {
    0.8
}

fn default_index() -> String {
    DEFAULT_INDEX_COLUMN.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub target_column: String,
    /// Columns removed before splitting so the task stays nontrivial.
    #[serde(default)]
    pub dropped_columns: Vec<String>,
    /// Positive class for binary tasks, in its CSV textual form.
    #[serde(default)]
    pub positive_label: Option<String>,
    #[serde(default = "default_split")]
    pub split_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    /// Optional seeded down-sample applied before the split.
    #[serde(default)]
    pub subsample_rows: Option<usize>,
    #[serde(default)]
    pub dataset_description: String,
    #[serde(default = "default_index")]
    pub index_column: String,
}

impl TaskSpec {
    pub fn new(target: &str) -> Self {
        TaskSpec {
            target_column: target.to_string(),
            dropped_columns: Vec::new(),
            positive_label: None,
            split_fraction: default_split(),
            split_seed: 0,
            subsample_rows: None,
            dataset_description: String::new(),
            index_column: default_index(),
        }
    }

    pub fn validate(&self) -> Result<(), ProvisionError> {
        if self.dropped_columns.contains(&self.target_column) {
            return Err(ProvisionError::InvalidTask("target column is listed as dropped".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(ProvisionError::InvalidTask(format!("split fraction {} outside (0, 1)", self.split_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    /// SHA-256 of the canonical CSV bytes of the raw input.
    pub checksum: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub train_clean: Table,
    pub test_clean: Table,
    pub train_dirty: Option<Table>,
    pub task: TaskSpec,
    pub provenance: Provenance,
}

/// Textual class key of a target cell. `None` for missing.
pub fn class_key(cell: &Cell) -> Option<String> {
    match cell {
        Cell::Missing => None,
        other => Some(other.to_field()),
    }
}

/// Split `raw` into clean train and test tables.
///
/// Rows with a missing target are discarded, the optional subsample is
/// taken, the protected index `0..n` is attached, and then each class is
/// shuffled and cut so that the per-class train counts sum to
/// `round(split_fraction * n)` (largest-remainder apportionment).
pub fn prepare_bundle(raw: &Table, task: &TaskSpec, source: &str) -> Result<DatasetBundle, ProvisionError> {
    task.validate()?;
    let (target_pos, _) = raw.column(&task.target_column).map_err(|_| ProvisionError::MissingTarget(task.target_column.clone()))?;
    let checksum = sha256_hex(&to_csv_bytes(raw));

    let mut kept: Vec<usize> = (0..raw.n_rows()).filter(|&r| !raw.cell(r, target_pos).is_missing()).collect();
    if let Some(n) = task.subsample_rows {
        if n < kept.len() {
            kept = Substream::new(task.split_seed, "subsample").sample_sorted(&kept, n);
        }
    }
    let table = raw.take_rows(&kept).drop_columns(&task.dropped_columns);
    let features = table.n_cols() - 1;
    if features == 0 {
        return Err(ProvisionError::InvalidTask("no feature columns remain after dropping".into()));
    }
    let table = table.with_index_column(&task.index_column)?;
    let target_pos = table.column_position(&task.target_column).expect("target kept");

    let mut by_class: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for r in 0..table.n_rows() {
        let key = class_key(table.cell(r, target_pos)).expect("missing targets removed");
        by_class.entry(key).or_default().push(r);
    }
    if by_class.len() < 2 {
        return Err(ProvisionError::DegenerateTarget(task.target_column.clone()));
    }

    let n = table.n_rows();
    let total_train = (task.split_fraction * n as f64).round() as usize;
    let mut quotas: Vec<(String, usize, f64)> = by_class
        .iter()
        .map(|(k, rows)| {
            let exact = task.split_fraction * rows.len() as f64;
            (k.clone(), exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let mut remaining = total_train.saturating_sub(quotas.iter().map(|q| q.1).sum());
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    // Largest remainder first; ties go to the lexicographically first class.
    order.sort_by(|&a, &b| quotas[b].2.total_cmp(&quotas[a].2).then(a.cmp(&b)));
    for i in order {
        if remaining == 0 {
            break;
        }
        if quotas[i].1 < by_class[&quotas[i].0].len() {
            quotas[i].1 += 1;
            remaining -= 1;
        }
    }

    let mut train_rows = BTreeSet::new();
    for (key, quota, _) in &quotas {
        let mut rows = by_class[key].clone();
        Substream::new(task.split_seed, &format!("split/{key}")).shuffle(&mut rows);
        train_rows.extend(rows.into_iter().take(*quota));
    }
    let test_rows: Vec<usize> = (0..n).filter(|r| !train_rows.contains(r)).collect();
    let train_rows: Vec<usize> = train_rows.into_iter().collect();

    Ok(DatasetBundle {
        train_clean: table.take_rows(&train_rows),
        test_clean: table.take_rows(&test_rows),
        train_dirty: None,
        task: task.clone(),
        provenance: Provenance { source: source.to_string(), checksum, seed: task.split_seed },
    })
}

/// The declarative corruption recipe registered for `dataset_id`.
pub fn recipe_for(dataset_id: &str) -> Result<CorruptionRecipe, ProvisionError> {
    recipes::builtin(dataset_id).ok_or_else(|| ProvisionError::UnknownDataset(dataset_id.to_string()))
}

impl DatasetBundle {
    /// Apply `recipe` to the clean train split, storing the dirty table.
    pub fn corrupt(
        mut self,
        recipe: &CorruptionRecipe,
    ) -> Result<(DatasetBundle, crate::corrupt::GroundTruthLog), crate::corrupt::CorruptError> {
        let (dirty, log) = crate::corrupt::apply_recipe(&self.train_clean, recipe)?;
        self.train_dirty = Some(dirty);
        Ok((self, log))
    }
}
