//! CSV reading and writing.
//!
//! Wire rules: RFC-4180 quoting, UTF-8, LF line endings, a mandatory header
//! row, and empty fields for missing cells. A column is numeric when every
//! non-empty field parses as a finite `f64`; otherwise it is categorical.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::table::{Cell, ColumnKind, ColumnSpec, Table, TableError, DEFAULT_INDEX_COLUMN};

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("malformed csv: {0}")]
    MalformedCsv(String),
    #[error("column `{column}` is declared {kind} but row {row} holds `{value}`")]
    KindMismatch { column: String, kind: ColumnKind, row: usize, value: String },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// Options controlling how a CSV file is turned into a [`Table`].
#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Name of the protected index column; detected when present in the header.
    pub index_column: Option<String>,
    /// Kinds that replace inference for the named columns.
    pub kind_overrides: BTreeMap<String, ColumnKind>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { index_column: Some(DEFAULT_INDEX_COLUMN.to_string()), kind_overrides: BTreeMap::new() }
    }
}

impl CsvOptions {
    /// Options that leave the index column as an ordinary column.
    pub fn raw() -> Self {
        CsvOptions { index_column: None, kind_overrides: BTreeMap::new() }
    }

    pub fn with_kinds<'a>(mut self, kinds: impl IntoIterator<Item = (&'a str, ColumnKind)>) -> Self {
        self.kind_overrides.extend(kinds.into_iter().map(|(n, k)| (n.to_string(), k)));
        self
    }
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Table, CsvError> {
    load_csv_with(path, &CsvOptions::default())
}

pub fn load_csv_with(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Table, CsvError> {
    let path = path.as_ref();
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(CsvError::FileNotFound(path.to_path_buf())),
        Err(source) => return Err(CsvError::Io { path: path.to_path_buf(), source }),
    };
    parse_csv(&bytes, options)
}

/// Parse CSV bytes already in memory.
pub fn parse_csv(bytes: &[u8], options: &CsvOptions) -> Result<Table, CsvError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(bytes);
    let malformed = |e: csv::Error| CsvError::MalformedCsv(e.to_string());

    let header = reader.headers().map_err(malformed)?.clone();
    if header.is_empty() {
        return Err(CsvError::MalformedCsv("empty file or missing header".into()));
    }
    let names: Vec<String> = header.iter().map(|h| h.to_string()).collect();
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(CsvError::MalformedCsv(format!("duplicate header `{n}`")));
        }
    }

    let mut raw: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(malformed)?;
        raw.push(record.iter().map(|f| f.to_string()).collect());
    }

    let kinds: Vec<ColumnKind> = (0..names.len())
        .map(|c| {
            options.kind_overrides.get(&names[c]).copied().unwrap_or_else(|| {
                let numeric = raw.iter().all(|r| r[c].is_empty() || parse_number(&r[c]).is_some());
                if numeric {
                    ColumnKind::Numeric
                } else {
                    ColumnKind::Categorical
                }
            })
        })
        .collect();

    let mut rows = Vec::with_capacity(raw.len());
    for (r, fields) in raw.into_iter().enumerate() {
        let mut row = Vec::with_capacity(fields.len());
        for (c, field) in fields.into_iter().enumerate() {
            let cell = if field.is_empty() {
                Cell::Missing
            } else if kinds[c] == ColumnKind::Numeric {
                match parse_number(&field) {
                    Some(v) => Cell::Number(v),
                    None => {
                        return Err(CsvError::KindMismatch {
                            column: names[c].clone(),
                            kind: kinds[c],
                            row: r,
                            value: field,
                        })
                    }
                }
            } else {
                Cell::Text(field)
            };
            row.push(cell);
        }
        rows.push(row);
    }

    let index_column = options.index_column.clone().filter(|n| names.contains(n));
    let columns = names.into_iter().zip(kinds).map(|(name, kind)| ColumnSpec { name, kind }).collect();
    Ok(Table::new(columns, rows, index_column)?)
}

fn parse_number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Serialize to the canonical byte form. Equal tables give equal bytes.
pub fn to_csv_bytes(table: &Table) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(Vec::new());
    // Writing into a Vec cannot fail.
    writer.write_record(table.columns().iter().map(|c| c.name.as_str())).expect("in-memory write");
    for row in table.rows() {
        writer.write_record(row.iter().map(Cell::to_field)).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

pub fn save_csv(table: &Table, path: impl AsRef<Path>) -> Result<PathBuf, CsvError> {
    let path = path.as_ref();
    fs::write(path, to_csv_bytes(table)).map_err(|source| CsvError::Io { path: path.to_path_buf(), source })?;
    Ok(path.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Table, CsvError> {
        parse_csv(s.as_bytes(), &CsvOptions::default())
    }

    #[test]
    fn infers_numeric_and_categorical() {
        let t = parse("a,b\n1,x\n2.5,y\n-3,z\n").unwrap();
        assert_eq!(t.columns()[0].kind, ColumnKind::Numeric);
        assert_eq!(t.columns()[1].kind, ColumnKind::Categorical);
        assert_eq!(t.cell(1, 0), &Cell::Number(2.5));
    }

    #[test]
    fn single_non_numeric_value_makes_column_categorical() {
        let t = parse("a\n1\n2\nthree\n").unwrap();
        assert_eq!(t.columns()[0].kind, ColumnKind::Categorical);
        assert_eq!(t.cell(0, 0), &Cell::Text("1".into()));
    }

    #[test]
    fn empty_field_is_missing() {
        let t = parse("a,b\n,x\n2,\n").unwrap();
        assert_eq!(t.cell(0, 0), &Cell::Missing);
        assert_eq!(t.cell(1, 1), &Cell::Missing);
        assert_eq!(t.columns()[0].kind, ColumnKind::Numeric);
    }

    #[test]
    fn empty_file_is_malformed() {
        assert!(matches!(parse(""), Err(CsvError::MalformedCsv(_))));
    }

    #[test]
    fn ragged_rows_and_duplicate_headers_are_malformed() {
        assert!(matches!(parse("a,b\n1,2\n3\n"), Err(CsvError::MalformedCsv(_))));
        assert!(matches!(parse("a,a\n1,2\n"), Err(CsvError::MalformedCsv(_))));
    }

    #[test]
    fn missing_file_is_reported() {
        assert!(matches!(load_csv("/definitely/not/here.csv"), Err(CsvError::FileNotFound(_))));
    }

    #[test]
    fn detects_index_column() {
        let t = parse("_competition_index,a\n0,x\n1,y\n").unwrap();
        assert_eq!(t.index_column(), Some("_competition_index"));
        assert!(matches!(parse("_competition_index,a\n0,x\n0,y\n"), Err(CsvError::Table(_))));
        let raw = parse_csv(b"_competition_index,a\n0,x\n0,y\n", &CsvOptions::raw()).unwrap();
        assert_eq!(raw.index_column(), None);
    }

    #[test]
    fn overrides_replace_inference() {
        let opts = CsvOptions::default().with_kinds([("a", ColumnKind::Categorical)]);
        let t = parse_csv(b"a\n1\n2\n", &opts).unwrap();
        assert_eq!(t.cell(0, 0), &Cell::Text("1".into()));
        let opts = CsvOptions::default().with_kinds([("a", ColumnKind::Numeric)]);
        assert!(matches!(parse_csv(b"a\nx\n", &opts), Err(CsvError::KindMismatch { .. })));
    }

    #[test]
    fn missing_numeric_is_written_as_empty_field() {
        let t = parse("a,b\n1,x\n,y\n").unwrap();
        assert_eq!(String::from_utf8(to_csv_bytes(&t)).unwrap(), "a,b\n1,x\n,y\n");
    }

    #[test]
    fn quoting_follows_rfc4180() {
        let t = parse("name,v\n\"Smith, Mr. John\",1\n\"say \"\"hi\"\"\",2\n").unwrap();
        assert_eq!(t.cell(0, 0), &Cell::Text("Smith, Mr. John".into()));
        assert_eq!(t.cell(1, 0), &Cell::Text("say \"hi\"".into()));
        let back = parse(std::str::from_utf8(&to_csv_bytes(&t)).unwrap()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let t = parse("a,b\n0.1,x\n1e-7,\n").unwrap();
        let p1 = save_csv(&t, dir.path().join("one.csv")).unwrap();
        let p2 = save_csv(&t, dir.path().join("two.csv")).unwrap();
        assert_eq!(fs::read(p1).unwrap(), fs::read(p2).unwrap());
    }
}
