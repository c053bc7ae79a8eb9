use serde::{Deserialize, Serialize};

use super::CorruptError;
use crate::table::{Cell, ColumnKind, Schema};

/// One written cell: where, what it was, what it became, and which step
/// (1-based) wrote it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub index: i64,
    pub column: String,
    pub old: Cell,
    pub new: Cell,
    pub step: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruthLog {
    pub entries: Vec<LogEntry>,
}

impl GroundTruthLog {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn for_step(&self, step: usize) -> impl Iterator<Item = &LogEntry> {
        self.entries.iter().filter(move |e| e.step == step)
    }

    /// CSV with header `index,column,old,new,step`; missing cells are empty.
    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["index", "column", "old", "new", "step"]).expect("in-memory write");
        for e in &self.entries {
            w.write_record([e.index.to_string(), e.column.clone(), e.old.to_field(), e.new.to_field(), e.step.to_string()])
                .expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }

    /// Parse the CSV form. Cell kinds come from `schema`, since the wire form
    /// does not distinguish numbers from numeric-looking strings.
    pub fn from_csv_bytes(bytes: &[u8], schema: &Schema) -> Result<Self, CorruptError> {
        let bad = |m: String| CorruptError::LogMismatch(m);
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
        let mut entries = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != 5 {
                return Err(bad(format!("expected 5 fields, got {}", rec.len())));
            }
            let column = rec[1].to_string();
            let kind = schema.kind_of(&column).ok_or_else(|| bad(format!("unknown column `{column}`")))?;
            let cell = |s: &str| -> Result<Cell, CorruptError> {
                if s.is_empty() {
                    Ok(Cell::Missing)
                } else if kind == ColumnKind::Numeric {
                    s.parse::<f64>().map(Cell::Number).map_err(|_| bad(format!("`{s}` is not numeric")))
                } else {
                    Ok(Cell::Text(s.to_string()))
                }
            };
            entries.push(LogEntry {
                index: rec[0].parse().map_err(|_| bad(format!("bad index `{}`", &rec[0])))?,
                old: cell(&rec[2])?,
                new: cell(&rec[3])?,
                step: rec[4].parse().map_err(|_| bad(format!("bad step `{}`", &rec[4])))?,
                column,
            });
        }
        Ok(GroundTruthLog { entries })
    }
}
