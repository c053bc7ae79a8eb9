//! In-memory tables with typed columns and a protected row identifier.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default name of the protected row-identifier column.
pub const DEFAULT_INDEX_COLUMN: &str = "_competition_index";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Text,
}

impl ColumnKind {
    pub fn is_stringly(self) -> bool {
        matches!(self, ColumnKind::Categorical | ColumnKind::Text)
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
            ColumnKind::Text => "text",
        })
    }
}

/// A single owned cell value.
///
/// Numeric columns only ever hold `Number` or `Missing`; categorical and text
/// columns only ever hold `Text` or `Missing`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Textual form used on the CSV wire: shortest round-trip decimal for
    /// numbers, the raw string for text, empty for missing.
    pub fn to_field(&self) -> String {
        match self {
            Cell::Number(v) => format_number(*v),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    /// Bitwise equality for numbers, so `-0.0` and `0.0` are distinct.
    pub fn identical(&self, other: &Cell) -> bool {
        match (self, other) {
            (Cell::Number(a), Cell::Number(b)) => a.to_bits() == b.to_bits(),
            (a, b) => a == b,
        }
    }

    fn fits(&self, kind: ColumnKind) -> bool {
        match self {
            Cell::Missing => true,
            Cell::Number(v) => kind == ColumnKind::Numeric && v.is_finite(),
            Cell::Text(_) => kind.is_stringly(),
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Missing => f.write_str("<missing>"),
            other => f.write_str(&other.to_field()),
        }
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),
    #[error("row {row} has {got} cells, expected {expected}")]
    RowWidth { row: usize, got: usize, expected: usize },
    #[error("cell `{value}` in row {row} does not fit {kind} column `{column}`")]
    CellKind { row: usize, column: String, kind: ColumnKind, value: String },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("index column `{column}`: {reason}")]
    BadIndex { column: String, reason: String },
}

/// Row-major table with an ordered column list.
///
/// Construction validates every invariant; all transforming methods return a
/// new table and leave `self` untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<Cell>>,
    index_column: Option<String>,
}

impl Table {
    pub fn new(
        columns: Vec<ColumnSpec>,
        rows: Vec<Vec<Cell>>,
        index_column: Option<String>,
    ) -> Result<Self, TableError> {
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(TableError::DuplicateColumn(c.name.clone()));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::RowWidth { row: r, got: row.len(), expected: columns.len() });
            }
            for (cell, spec) in row.iter().zip(&columns) {
                if !cell.fits(spec.kind) {
                    return Err(TableError::CellKind {
                        row: r,
                        column: spec.name.clone(),
                        kind: spec.kind,
                        value: cell.to_field(),
                    });
                }
            }
        }
        let table = Table { columns, rows, index_column };
        table.check_index()?;
        Ok(table)
    }

    fn check_index(&self) -> Result<(), TableError> {
        let Some(name) = &self.index_column else { return Ok(()) };
        let bad = |reason: String| TableError::BadIndex { column: name.clone(), reason };
        let pos = self.column_position(name).ok_or_else(|| bad("column not present".into()))?;
        if self.columns[pos].kind != ColumnKind::Numeric {
            return Err(bad("must be numeric".into()));
        }
        let mut seen = HashSet::with_capacity(self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            let v = match &row[pos] {
                Cell::Number(v) => *v,
                _ => return Err(bad(format!("missing value in row {r}"))),
            };
            let id = index_value(v).ok_or_else(|| bad(format!("non-integer value {v} in row {r}")))?;
            if !seen.insert(id) {
                return Err(bad(format!("duplicate value {id}")));
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn index_column(&self) -> Option<&str> {
        self.index_column.as_deref()
    }

    pub fn column_position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Result<(usize, &ColumnSpec), TableError> {
        self.column_position(name)
            .map(|p| (p, &self.columns[p]))
            .ok_or_else(|| TableError::UnknownColumn(name.to_string()))
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.rows[row][col]
    }

    /// Iterator over one column's cells in row order.
    pub fn column_cells(&self, col: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[col])
    }

    pub fn schema(&self) -> Schema {
        Schema { columns: self.columns.clone(), index_column: self.index_column.clone() }
    }

    /// Index values in row order. Empty when the table has no index column.
    pub fn index_values(&self) -> Vec<i64> {
        let Some(pos) = self.index_column.as_deref().and_then(|n| self.column_position(n)) else {
            return Vec::new();
        };
        self.rows.iter().filter_map(|r| r[pos].as_f64().and_then(index_value)).collect()
    }

    /// Map from index value to row position.
    pub fn index_lookup(&self) -> BTreeMap<i64, usize> {
        self.index_values().into_iter().enumerate().map(|(p, v)| (v, p)).collect()
    }

    /// New table keeping only the given row positions, in the given order.
    pub fn take_rows(&self, positions: &[usize]) -> Table {
        Table {
            columns: self.columns.clone(),
            rows: positions.iter().map(|&p| self.rows[p].clone()).collect(),
            index_column: self.index_column.clone(),
        }
    }

    /// New table without the named columns. Unknown names are ignored.
    pub fn drop_columns(&self, names: &[String]) -> Table {
        let keep: Vec<usize> =
            (0..self.columns.len()).filter(|&i| !names.contains(&self.columns[i].name)).collect();
        let index_column = self.index_column.clone().filter(|n| !names.contains(n));
        Table {
            columns: keep.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self.rows.iter().map(|r| keep.iter().map(|&i| r[i].clone()).collect()).collect(),
            index_column,
        }
    }

    /// New table with a fresh integer column `name` holding `0..n` prepended.
    pub fn with_index_column(&self, name: &str) -> Result<Table, TableError> {
        if self.column_position(name).is_some() {
            return Err(TableError::DuplicateColumn(name.to_string()));
        }
        let mut columns = Vec::with_capacity(self.columns.len() + 1);
        columns.push(ColumnSpec { name: name.to_string(), kind: ColumnKind::Numeric });
        columns.extend(self.columns.iter().cloned());
        let rows = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = Vec::with_capacity(r.len() + 1);
                row.push(Cell::Number(i as f64));
                row.extend(r.iter().cloned());
                row
            })
            .collect();
        Ok(Table { columns, rows, index_column: Some(name.to_string()) })
    }

    /// New table with a set of single-cell replacements applied.
    pub fn with_cells<I>(&self, edits: I) -> Result<Table, TableError>
    where
        I: IntoIterator<Item = (usize, usize, Cell)>,
    {
        let mut out = self.clone();
        for (row, col, cell) in edits {
            let spec = &out.columns[col];
            if !cell.fits(spec.kind) {
                return Err(TableError::CellKind {
                    row,
                    column: spec.name.clone(),
                    kind: spec.kind,
                    value: cell.to_field(),
                });
            }
            out.rows[row][col] = cell;
        }
        if out.index_column.as_deref().and_then(|n| out.column_position(n)).is_some() {
            out.check_index()?;
        }
        Ok(out)
    }

    /// Cell-by-cell comparison that treats numbers bitwise.
    pub fn identical(&self, other: &Table) -> bool {
        self.columns == other.columns
            && self.index_column == other.index_column
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.identical(y)))
    }
}

/// Integer value of an index cell, if it is integral and within `i64`.
pub fn index_value(v: f64) -> Option<i64> {
    (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Column names and kinds plus the protected index name.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    pub index_column: Option<String>,
}

impl Schema {
    pub fn names(&self) -> BTreeSet<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn kind_of(&self, name: &str) -> Option<ColumnKind> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.kind)
    }

    fn keyed(&self) -> BTreeMap<&str, ColumnKind> {
        self.columns.iter().map(|c| (c.name.as_str(), c.kind)).collect()
    }
}

// Order-insensitive on names, sensitive to kinds.
impl PartialEq for Schema {
    fn eq(&self, other: &Self) -> bool {
        self.index_column == other.index_column && self.keyed() == other.keyed()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaDiff {
    pub added: BTreeSet<String>,
    pub removed: BTreeSet<String>,
    pub index_ok: bool,
}

impl SchemaDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty()
    }
}

/// Names present only in `candidate`, names present only in `reference`, and
/// whether the reference's protected index survives in the candidate.
pub fn compare_schema(candidate: &Schema, reference: &Schema) -> SchemaDiff {
    let cand = candidate.names();
    let refn = reference.names();
    let index_name = reference.index_column.as_deref().unwrap_or(DEFAULT_INDEX_COLUMN);
    SchemaDiff {
        added: cand.difference(&refn).map(|s| s.to_string()).collect(),
        removed: refn.difference(&cand).map(|s| s.to_string()).collect(),
        index_ok: cand.contains(index_name),
    }
}
