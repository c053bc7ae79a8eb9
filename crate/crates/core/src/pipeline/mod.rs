//! The fixed evaluation pipeline behind the submission tool.
//!
//! A submitted training table is imputed, one-hot encoded, standardized and
//! used to fit a classifier, which is then scored by F1 on the clean
//! held-out test split. Every fitted statistic comes from the submitted table
//! alone.

mod describe;
pub mod logistic;
mod matrix;
pub mod metrics;
pub mod preprocess;
pub mod tree;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csv_io::{load_csv_with, parse_csv, CsvError, CsvOptions};
use crate::provision::{class_key, DatasetBundle, TaskSpec};
use crate::table::{Schema, Table};

pub use describe::describe_pipeline;
pub use logistic::{FitOptions, LogisticModel, LogisticObjective};
pub use matrix::Matrix;
pub use metrics::{f1_score, Averaging, MetricsError};
pub use preprocess::{FeatureBlock, Preprocessor, MISSING_TOKEN, OTHER_TOKEN};
pub use tree::DecisionTree;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("target column `{0}` not in training table")]
    MissingTarget(String),
    #[error("target column `{0}` has fewer than two classes in the training table")]
    DegenerateTarget(String),
    #[error("training table has no usable rows")]
    EmptyTrain,
    #[error("bundle has no dirty training table")]
    NoDirtyTable,
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelConfig {
    LogisticRegression { l2: f64, max_iter: usize, tol: f64 },
    DecisionTree { max_depth: usize, min_samples_leaf: usize },
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::LogisticRegression { l2: 1e-3, max_iter: 100, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Averaging {
    /// Binary on the task's positive label when the task has two classes,
    /// macro otherwise.
    #[default]
    Auto,
    Binary,
    Macro,
}

fn default_top_k() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Categories kept per one-hot column, by training frequency.
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub f1_averaging: F1Averaging,
    /// Recorded for lineage; both models are deterministic without it.
    #[serde(default)]
    pub training_seed: u64,
    /// Text columns that should be one-hot encoded instead of dropped.
    #[serde(default)]
    pub text_features: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            top_k: default_top_k(),
            model: ModelConfig::default(),
            f1_averaging: F1Averaging::Auto,
            training_seed: 0,
            text_features: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Logistic(LogisticModel),
    Tree(DecisionTree),
}

impl Model {
    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        match self {
            Model::Logistic(m) => m.predict(x),
            Model::Tree(t) => t.predict(x),
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            Model::Logistic(m) => m.converged,
            Model::Tree(_) => true,
        }
    }
}

pub fn fit_transform(
    train: &Table,
    target: &str,
    config: &PipelineConfig,
) -> Result<(Matrix, Vec<usize>, Preprocessor), PipelineError> {
    Preprocessor::fit(train, target, config, None)
}

pub fn train_model(x: &Matrix, y: &[usize], n_classes: usize, config: &PipelineConfig) -> Result<Model, PipelineError> {
    if x.rows() == 0 {
        return Err(PipelineError::EmptyTrain);
    }
    Ok(match &config.model {
        ModelConfig::LogisticRegression { l2, max_iter, tol } => {
            Model::Logistic(logistic::fit(x, y, n_classes, &FitOptions { l2: *l2, max_iter: *max_iter, tol: *tol }))
        }
        ModelConfig::DecisionTree { max_depth, min_samples_leaf } => {
            Model::Tree(DecisionTree::fit(x, y, n_classes, *max_depth, *min_samples_leaf))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub f1: f64,
    pub n_train_rows_used: usize,
    pub fitted_category_counts: BTreeMap<String, usize>,
    pub n_features: usize,
    pub converged: bool,
    pub wall_time_ms: u64,
}

impl EvalResult {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &EvalResult) -> bool {
        self.f1.to_bits() == other.f1.to_bits()
            && self.n_train_rows_used == other.n_train_rows_used
            && self.fitted_category_counts == other.fitted_category_counts
            && self.n_features == other.n_features
            && self.converged == other.converged
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub p_clean: f64,
    pub p_dirty: f64,
    pub gap: f64,
}

/// Scores training tables against a fixed held-out test split.
#[derive(Debug, Clone)]
pub struct Evaluator {
    test: Table,
    reference: Schema,
    task: TaskSpec,
    config: PipelineConfig,
}

impl Evaluator {
    pub fn new(bundle: &DatasetBundle, config: &PipelineConfig) -> Self {
        Self::from_parts(bundle.test_clean.clone(), bundle.train_clean.schema(), bundle.task.clone(), config.clone())
    }

    pub fn from_parts(test: Table, reference: Schema, task: TaskSpec, config: PipelineConfig) -> Self {
        Evaluator { test, reference, task, config }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn task(&self) -> &TaskSpec {
        &self.task
    }

    pub fn reference(&self) -> &Schema {
        &self.reference
    }

    pub fn test(&self) -> &Table {
        &self.test
    }

    /// CSV options that read a submission with the reference column kinds.
    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            index_column: Some(self.task.index_column.clone()),
            kind_overrides: self.reference.columns.iter().map(|c| (c.name.clone(), c.kind)).collect(),
        }
    }

    fn averaging(&self, train_classes: &[String], truth: &[String]) -> Averaging<String> {
        let all: BTreeSet<&String> = train_classes.iter().chain(truth).collect();
        let binary = match self.config.f1_averaging {
            F1Averaging::Auto => all.len() <= 2,
            F1Averaging::Binary => true,
            F1Averaging::Macro => false,
        };
        match (&self.task.positive_label, binary) {
            (Some(pos), true) => Averaging::Binary(pos.clone()),
            (None, true) if self.config.f1_averaging == F1Averaging::Binary => {
                Averaging::Binary(all.iter().next_back().map(|s| s.to_string()).unwrap_or_default())
            }
            _ => Averaging::Macro,
        }
    }

    pub fn evaluate_table(&self, train: &Table) -> Result<EvalResult, PipelineError> {
        let start = Instant::now();
        let target = &self.task.target_column;
        let (x, y, pre) = Preprocessor::fit(train, target, &self.config, Some(&self.reference))?;
        let model = train_model(&x, &y, pre.classes.len(), &self.config)?;

        let test_target = self.test.column_position(target).ok_or_else(|| PipelineError::MissingTarget(target.clone()))?;
        let truth: Vec<String> = self.test.column_cells(test_target).map(|c| class_key(c).unwrap_or_default()).collect();
        let pred: Vec<String> = model.predict(&pre.transform(&self.test)).into_iter().map(|c| pre.classes[c].clone()).collect();
        let f1 = f1_score(&pred, &truth, &self.averaging(&pre.classes, &truth))?;
        Ok(EvalResult {
            f1,
            n_train_rows_used: y.len(),
            fitted_category_counts: pre.category_counts(),
            n_features: x.cols(),
            converged: model.converged(),
            wall_time_ms: start.elapsed().as_millis() as u64,
        })
    }

    pub fn evaluate_path(&self, path: &Path) -> Result<EvalResult, PipelineError> {
        let table = load_csv_with(path, &self.csv_options())?;
        self.evaluate_table(&table)
    }

    pub fn evaluate_bytes(&self, bytes: &[u8]) -> Result<EvalResult, PipelineError> {
        let table = parse_csv(bytes, &self.csv_options())?;
        self.evaluate_table(&table)
    }
}

/// Load the submitted file, fit the pipeline on it and score on the bundle's
/// clean test split.
pub fn evaluate_submission(path: &Path, bundle: &DatasetBundle, config: &PipelineConfig) -> Result<EvalResult, PipelineError> {
    Evaluator::new(bundle, config).evaluate_path(path)
}

/// Scores of the clean and the dirty training tables.
pub fn compute_baselines(bundle: &DatasetBundle, config: &PipelineConfig) -> Result<BaselineReport, PipelineError> {
    let dirty = bundle.train_dirty.as_ref().ok_or(PipelineError::NoDirtyTable)?;
    let eval = Evaluator::new(bundle, config);
    let p_clean = eval.evaluate_table(&bundle.train_clean)?.f1;
    let p_dirty = eval.evaluate_table(dirty)?.f1;
    Ok(BaselineReport { p_clean, p_dirty, gap: p_clean - p_dirty })
}
