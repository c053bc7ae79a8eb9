//! Validation of agent submissions before they reach the evaluator.
//!
//! Every failure is a verdict, never an error: the agent always gets a
//! message back. Categories follow a fixed precedence, DatasetNotFound over
//! ColumnViolation over Other.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::csv_io::{parse_csv, CsvError, CsvOptions};
use crate::provision::DatasetBundle;
use crate::table::{index_value, Cell, ColumnKind, Schema, Table, DEFAULT_INDEX_COLUMN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Outcome {
    Accepted,
    ColumnViolation,
    DatasetNotFound,
    Other,
}

impl Outcome {
    pub fn is_failure(self) -> bool {
        self != Outcome::Accepted
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Accepted => "Accepted",
            Outcome::ColumnViolation => "ColumnViolation",
            Outcome::DatasetNotFound => "DatasetNotFound",
            Outcome::Other => "Other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub outcome: Outcome,
    pub detail: String,
    /// Column names or the path, depending on the outcome.
    pub offending: Vec<String>,
}

impl ValidationVerdict {
    pub fn accepted() -> Self {
        ValidationVerdict { outcome: Outcome::Accepted, detail: "submission accepted".into(), offending: Vec::new() }
    }

    pub fn other(detail: impl Into<String>) -> Self {
        ValidationVerdict { outcome: Outcome::Other, detail: detail.into(), offending: Vec::new() }
    }

    pub fn is_accepted(&self) -> bool {
        self.outcome == Outcome::Accepted
    }
}

/// What a submission is checked against: the training file handed to the
/// agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateReference {
    pub schema: Schema,
    pub index_values: BTreeSet<i64>,
    pub n_rows: usize,
    /// When set, submissions must keep this column so they can be scored.
    pub target_column: Option<String>,
}

impl GateReference {
    pub fn from_table(table: &Table, target_column: Option<&str>) -> Self {
        GateReference {
            schema: table.schema(),
            index_values: table.index_values().into_iter().collect(),
            n_rows: table.n_rows(),
            target_column: target_column.map(String::from),
        }
    }

    pub fn for_bundle(bundle: &DatasetBundle) -> Self {
        Self::from_table(&bundle.train_clean, Some(&bundle.task.target_column))
    }

    fn index_name(&self) -> &str {
        self.schema.index_column.as_deref().unwrap_or(DEFAULT_INDEX_COLUMN)
    }
}

pub fn validate_submission(path: &Path, reference: &GateReference) -> ValidationVerdict {
    let shown = path.display().to_string();
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            return ValidationVerdict {
                outcome: Outcome::DatasetNotFound,
                detail: format!("dataset path `{shown}` does not exist or cannot be read: {e}"),
                offending: vec![shown],
            }
        }
    };
    validate_bytes(&bytes, reference)
}

/// Same checks as [`validate_submission`] on bytes already in memory.
pub fn validate_bytes(bytes: &[u8], reference: &GateReference) -> ValidationVerdict {
    let candidate = match parse_csv(bytes, &CsvOptions::raw()) {
        Ok(t) => t,
        Err(CsvError::MalformedCsv(m)) => return ValidationVerdict::other(format!("file is not valid CSV: {m}")),
        Err(e) => return ValidationVerdict::other(format!("file could not be read as a table: {e}")),
    };

    let reference_names = reference.schema.names();
    let added: Vec<String> =
        candidate.columns().iter().filter(|c| !reference_names.contains(c.name.as_str())).map(|c| c.name.clone()).collect();
    if !added.is_empty() {
        return ValidationVerdict {
            outcome: Outcome::ColumnViolation,
            detail: format!("new columns were added: {}", added.join(", ")),
            offending: added,
        };
    }

    let index_name = reference.index_name();
    let Some(ix) = candidate.column_position(index_name) else {
        return ValidationVerdict::other(format!("index column `{index_name}` was removed"));
    };
    if let Some(target) = &reference.target_column {
        if candidate.column_position(target).is_none() {
            return ValidationVerdict::other(format!("target column `{target}` was removed"));
        }
    }
    for spec in candidate.columns() {
        if reference.schema.kind_of(&spec.name) == Some(ColumnKind::Numeric) && spec.kind != ColumnKind::Numeric {
            return ValidationVerdict::other(format!("column `{}` must stay numeric", spec.name));
        }
    }

    let mut seen = BTreeSet::new();
    for r in 0..candidate.n_rows() {
        let value = match candidate.cell(r, ix) {
            Cell::Number(v) => index_value(*v),
            _ => None,
        };
        let Some(v) = value else {
            return ValidationVerdict::other(format!("row {r}: index value `{}` is not an integer", candidate.cell(r, ix).to_field()));
        };
        if !reference.index_values.contains(&v) {
            return ValidationVerdict::other(format!("index value {v} is not in the original dataset; rows cannot be added"));
        }
        if !seen.insert(v) {
            return ValidationVerdict::other(format!("index value {v} appears more than once"));
        }
    }
    if candidate.n_rows() > reference.n_rows {
        return ValidationVerdict::other(format!("{} rows submitted, at most {} allowed", candidate.n_rows(), reference.n_rows));
    }
    ValidationVerdict::accepted()
}

/// Per-category share of all submissions, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FailureTable {
    pub submissions: usize,
    pub column_violation: f64,
    pub dataset_not_found: f64,
    pub other: f64,
    pub total: f64,
}

pub fn tally_failures(verdicts: &[ValidationVerdict]) -> FailureTable {
    let outcomes: Vec<Outcome> = verdicts.iter().map(|v| v.outcome).collect();
    tally_outcomes(&outcomes)
}

pub fn tally_outcomes(outcomes: &[Outcome]) -> FailureTable {
    let n = outcomes.len();
    if n == 0 {
        return FailureTable::default();
    }
    let count = |o: Outcome| outcomes.iter().filter(|&&x| x == o).count();
    let pct = |c: usize| (100 * c) as f64 / n as f64;
    let (cv, nf, ot) = (count(Outcome::ColumnViolation), count(Outcome::DatasetNotFound), count(Outcome::Other));
    FailureTable {
        submissions: n,
        column_violation: pct(cv),
        dataset_not_found: pct(nf),
        other: pct(ot),
        total: pct(cv + nf + ot),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csv_io::CsvOptions;

    fn reference() -> GateReference {
        let t = parse_csv(b"_competition_index,a,y\n0,1.5,x\n1,2.5,y\n2,3.5,x\n", &CsvOptions::default()).unwrap();
        GateReference::from_table(&t, Some("y"))
    }

    fn verdict(csv: &str) -> ValidationVerdict {
        validate_bytes(csv.as_bytes(), &reference())
    }

    #[test]
    fn identity_and_deletions_are_accepted() {
        assert!(verdict("_competition_index,a,y\n0,1.5,x\n1,2.5,y\n2,3.5,x\n").is_accepted());
        assert!(verdict("y,_competition_index\ny,1\nx,0\n").is_accepted());
        assert!(verdict("_competition_index,a,y\n").is_accepted());
    }

    #[test]
    fn added_column_lists_names() {
        let v = verdict("_competition_index,a,y,total_meat\n0,1,x,3\n");
        assert_eq!(v.outcome, Outcome::ColumnViolation);
        assert_eq!(v.offending, vec!["total_meat"]);
    }

    #[test]
    fn column_violation_outranks_index_problems() {
        let v = verdict("a,y,extra\n1,x,1\n");
        assert_eq!(v.outcome, Outcome::ColumnViolation);
    }

    #[test]
    fn other_category() {
        for csv in [
            "a,y\n1,x\n",
            "_competition_index,a,y\n0,1,x\n0,2,y\n",
            "_competition_index,a,y\n7,1,x\n",
            "_competition_index,a,y\n0.5,1,x\n",
            "_competition_index,a,y\n0,abc,x\n",
            "_competition_index,a\n0,1\n",
            "_competition_index,a,y\n0,1\n",
        ] {
            assert_eq!(verdict(csv).outcome, Outcome::Other, "{csv}");
        }
    }

    #[test]
    fn missing_path() {
        let v = validate_submission(Path::new("/nonexistent/train_cleaned_v1.csv"), &reference());
        assert_eq!(v.outcome, Outcome::DatasetNotFound);
        assert_eq!(v.offending, vec!["/nonexistent/train_cleaned_v1.csv"]);
    }

    #[test]
    fn tally_shapes() {
        let mut outcomes = vec![Outcome::Accepted; 865];
        outcomes.extend(vec![Outcome::ColumnViolation; 88]);
        outcomes.extend(vec![Outcome::Other; 47]);
        let t = tally_outcomes(&outcomes);
        assert_eq!((t.column_violation, t.dataset_not_found, t.other, t.total), (8.8, 0.0, 4.7, 13.5));
        assert_eq!(tally_outcomes(&[]), FailureTable::default());
        assert_eq!(tally_outcomes(&[Outcome::Accepted; 3]).total, 0.0);
    }
}
