//! Row predicates: conjunctions of per-cell conditions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{format_number, Cell, ColumnKind, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "in")]
    In,
    /// Substring match. With a list literal, any element may match.
    #[serde(rename = "contains")]
    Contains,
    #[serde(rename = "is_missing")]
    IsMissing,
}

impl Comparator {
    fn is_ordered(self) -> bool {
        matches!(self, Comparator::Lt | Comparator::Le | Comparator::Gt | Comparator::Ge)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Scalar(Scalar),
    List(Vec<Scalar>),
}

impl From<f64> for Literal {
    fn from(v: f64) -> Self {
        Literal::Scalar(Scalar::Number(v))
    }
}

impl From<&str> for Literal {
    fn from(v: &str) -> Self {
        Literal::Scalar(Scalar::Text(v.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub column: String,
    pub op: Comparator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<Literal>,
}

impl Condition {
    pub fn new(column: &str, op: Comparator, value: impl Into<Literal>) -> Self {
        Condition { column: column.to_string(), op, value: Some(value.into()) }
    }

    pub fn is_missing(column: &str) -> Self {
        Condition { column: column.to_string(), op: Comparator::IsMissing, value: None }
    }

    pub fn one_of<L: Into<Literal>>(column: &str, values: impl IntoIterator<Item = L>) -> Self {
        let items = values
            .into_iter()
            .map(|v| match v.into() {
                Literal::Scalar(s) => s,
                Literal::List(_) => panic!("nested list literal"),
            })
            .collect();
        Condition { column: column.to_string(), op: Comparator::In, value: Some(Literal::List(items)) }
    }

    pub fn contains_any(column: &str, needles: &[&str]) -> Self {
        Condition {
            column: column.to_string(),
            op: Comparator::Contains,
            value: Some(Literal::List(needles.iter().map(|s| Scalar::Text(s.to_string())).collect())),
        }
    }
}

/// A conjunction of conditions. The empty predicate matches every row.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RowPredicate {
    pub conditions: Vec<Condition>,
}

impl RowPredicate {
    pub fn all() -> Self {
        RowPredicate::default()
    }

    pub fn and(mut self, c: Condition) -> Self {
        self.conditions.push(c);
        self
    }

    pub fn columns(&self) -> impl Iterator<Item = &str> {
        self.conditions.iter().map(|c| c.column.as_str())
    }
}

impl From<Vec<Condition>> for RowPredicate {
    fn from(conditions: Vec<Condition>) -> Self {
        RowPredicate { conditions }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PredicateError {
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("comparator {op:?} cannot be applied to {kind} column `{column}` with literal {literal}")]
    TypeMismatch { column: String, kind: ColumnKind, op: Comparator, literal: String },
}

enum Test {
    Missing,
    NumCmp(Comparator, f64),
    NumIn(Vec<f64>),
    StrEq(bool, String),
    StrIn(Vec<String>),
    Contains(Vec<String>),
}

struct Compiled {
    col: usize,
    test: Test,
}

impl Compiled {
    fn eval(&self, cell: &Cell) -> bool {
        match (&self.test, cell) {
            (Test::Missing, c) => c.is_missing(),
            (_, Cell::Missing) => false,
            (Test::NumCmp(op, lit), Cell::Number(v)) => match op {
                Comparator::Eq => v == lit,
                Comparator::Ne => v != lit,
                Comparator::Lt => v < lit,
                Comparator::Le => v <= lit,
                Comparator::Gt => v > lit,
                Comparator::Ge => v >= lit,
                _ => unreachable!("compiled numeric comparator"),
            },
            (Test::NumIn(set), Cell::Number(v)) => set.contains(v),
            (Test::StrEq(eq, lit), Cell::Text(s)) => (s == lit) == *eq,
            (Test::StrIn(set), Cell::Text(s)) => set.iter().any(|x| x == s),
            (Test::Contains(needles), Cell::Text(s)) => needles.iter().any(|n| s.contains(n.as_str())),
            _ => false,
        }
    }
}

fn compile(table: &Table, pred: &RowPredicate) -> Result<Vec<Compiled>, PredicateError> {
    pred.conditions
        .iter()
        .map(|c| {
            let (col, spec) = table.column(&c.column).map_err(|_| PredicateError::UnknownColumn(c.column.clone()))?;
            let kind = spec.kind;
            let mismatch = || PredicateError::TypeMismatch {
                column: c.column.clone(),
                kind,
                op: c.op,
                literal: match &c.value {
                    Some(v) => serde_json::to_string(v).unwrap_or_default(),
                    None => "none".into(),
                },
            };
            let numeric = kind == ColumnKind::Numeric;
            let test = match (c.op, &c.value) {
                (Comparator::IsMissing, _) => Test::Missing,
                (op, Some(Literal::Scalar(Scalar::Number(v)))) if numeric && !matches!(op, Comparator::In | Comparator::Contains) => {
                    Test::NumCmp(op, *v)
                }
                (op, _) if op.is_ordered() => return Err(mismatch()),
                (Comparator::Eq | Comparator::Ne, Some(Literal::Scalar(Scalar::Text(s)))) if !numeric => {
                    Test::StrEq(c.op == Comparator::Eq, s.clone())
                }
                (Comparator::In, Some(Literal::List(items))) => {
                    if numeric {
                        Test::NumIn(items.iter().map(|s| match s { Scalar::Number(v) => Ok(*v), _ => Err(mismatch()) }).collect::<Result<_, _>>()?)
                    } else {
                        Test::StrIn(items.iter().map(|s| match s { Scalar::Text(t) => Ok(t.clone()), Scalar::Number(v) => Ok(format_number(*v)) }).collect::<Result<_, _>>()?)
                    }
                }
                (Comparator::Contains, Some(lit)) if !numeric => {
                    let needles = match lit {
                        Literal::Scalar(Scalar::Text(s)) => vec![s.clone()],
                        Literal::List(items) => items
                            .iter()
                            .map(|s| match s { Scalar::Text(t) => Ok(t.clone()), _ => Err(mismatch()) })
                            .collect::<Result<_, _>>()?,
                        _ => return Err(mismatch()),
                    };
                    Test::Contains(needles)
                }
                _ => return Err(mismatch()),
            };
            Ok(Compiled { col, test })
        })
        .collect()
}

/// Check that every condition is well-typed against `table`'s columns.
pub fn validate(table: &Table, pred: &RowPredicate) -> Result<(), PredicateError> {
    compile(table, pred).map(|_| ())
}

/// Positions of all rows satisfying every condition, in table order.
///
/// Missing cells satisfy only `is_missing`.
pub fn select_rows(table: &Table, pred: &RowPredicate) -> Result<Vec<usize>, PredicateError> {
    let compiled = compile(table, pred)?;
    Ok(table
        .rows()
        .iter()
        .enumerate()
        .filter(|(_, row)| compiled.iter().all(|c| c.eval(&row[c.col])))
        .map(|(i, _)| i)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csv_io::{parse_csv, CsvOptions};

    fn hotel() -> Table {
        parse_csv(
            b"year,country,lead_time\n2015,PRT,3\n2016,ESP,10\n2016,PRT,\n2017,,7\n",
            &CsvOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn equality_on_numeric_column() {
        let p = RowPredicate::all().and(Condition::new("year", Comparator::Eq, 2016.0));
        assert_eq!(select_rows(&hotel(), &p).unwrap(), vec![1, 2]);
    }

    #[test]
    fn nothing_matches() {
        let p = RowPredicate::all().and(Condition::new("year", Comparator::Eq, 1999.0));
        assert!(select_rows(&hotel(), &p).unwrap().is_empty());
    }

    #[test]
    fn missing_cells_only_match_is_missing() {
        let t = hotel();
        let ne = RowPredicate::all().and(Condition::new("country", Comparator::Ne, "PRT"));
        assert_eq!(select_rows(&t, &ne).unwrap(), vec![1]);
        let miss = RowPredicate::all().and(Condition::is_missing("country"));
        assert_eq!(select_rows(&t, &miss).unwrap(), vec![3]);
        let gt = RowPredicate::all().and(Condition::new("lead_time", Comparator::Gt, 0.0));
        assert_eq!(select_rows(&t, &gt).unwrap(), vec![0, 1, 3]);
    }

    #[test]
    fn set_and_substring_membership() {
        let t = hotel();
        let years = RowPredicate::all().and(Condition::one_of("year", [2015.0, 2017.0]));
        assert_eq!(select_rows(&t, &years).unwrap(), vec![0, 3]);
        let sub = RowPredicate::all().and(Condition::contains_any("country", &["PR", "SP"]));
        assert_eq!(select_rows(&t, &sub).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn errors() {
        let t = hotel();
        let unknown = RowPredicate::all().and(Condition::new("nope", Comparator::Eq, 1.0));
        assert_eq!(select_rows(&t, &unknown), Err(PredicateError::UnknownColumn("nope".into())));
        let ordered = RowPredicate::all().and(Condition::new("country", Comparator::Lt, "PRT"));
        assert!(matches!(select_rows(&t, &ordered), Err(PredicateError::TypeMismatch { .. })));
        let wrong_literal = RowPredicate::all().and(Condition::new("year", Comparator::Eq, "2016"));
        assert!(matches!(select_rows(&t, &wrong_literal), Err(PredicateError::TypeMismatch { .. })));
    }

    #[test]
    fn predicate_toml_form() {
        let p: RowPredicate = toml::from_str::<toml::Value>(
            r#"w = [ { column = "year", op = "!=", value = 2015 }, { column = "country", op = "in", value = ["PRT", "ESP"] } ]"#,
        )
        .unwrap()
        .get("w")
        .unwrap()
        .clone()
        .try_into()
        .unwrap();
        assert_eq!(p.conditions.len(), 2);
        assert_eq!(p.conditions[0].value, Some(Literal::Scalar(Scalar::Number(2015.0))));
        assert_eq!(select_rows(&hotel(), &p).unwrap(), vec![1, 2]);
    }
}
