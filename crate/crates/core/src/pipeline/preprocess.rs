use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::{PipelineConfig, PipelineError};
use crate::provision::class_key;
use crate::table::{format_number, Cell, ColumnKind, Schema, Table};

pub const MISSING_TOKEN: &str = "__MISSING__";
pub const OTHER_TOKEN: &str = "__OTHER__";
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureBlock {
    /// One output column; missing cells take the training median.
    Numeric { column: String, median: f64 },
    /// `vocabulary.len() + 2` output columns: one per kept category, then
    /// OTHER, then MISSING.
    OneHot { column: String, vocabulary: Vec<String> },
}

impl FeatureBlock {
    fn width(&self) -> usize {
        match self {
            FeatureBlock::Numeric { .. } => 1,
            FeatureBlock::OneHot { vocabulary, .. } => vocabulary.len() + 2,
        }
    }

    pub fn column(&self) -> &str {
        match self {
            FeatureBlock::Numeric { column, .. } | FeatureBlock::OneHot { column, .. } => column,
        }
    }
}

/// Everything fitted on the training table. Nothing here ever depends on
/// test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub target: String,
    pub classes: Vec<String>,
    pub blocks: Vec<FeatureBlock>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    /// Output columns that were constant in training; always emitted as 0.
    pub constant: Vec<bool>,
}

fn numeric_value(cell: &Cell) -> Option<f64> {
    match cell {
        Cell::Number(v) => Some(*v),
        Cell::Text(s) => s.trim().parse::<f64>().ok().filter(|v| v.is_finite()),
        Cell::Missing => None,
    }
}

fn category(cell: &Cell) -> Option<String> {
    match cell {
        Cell::Number(v) => Some(format_number(*v)),
        Cell::Text(s) => Some(s.clone()),
        Cell::Missing => None,
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

impl Preprocessor {
    /// Fit on `train` and return the standardized design matrix, the class
    /// index of every kept row, and the fitted preprocessor.
    ///
    /// Feature kinds come from `reference` when it names the column, else
    /// from `train`'s own schema. The index column and the target are never
    /// features; text columns are only used when listed in
    /// `config.text_features`. Rows with a missing target are skipped.
    pub fn fit(
        train: &Table,
        target: &str,
        config: &PipelineConfig,
        reference: Option<&Schema>,
    ) -> Result<(Matrix, Vec<usize>, Preprocessor), PipelineError> {
        let (target_pos, _) = train.column(target).map_err(|_| PipelineError::MissingTarget(target.to_string()))?;
        let rows: Vec<usize> = (0..train.n_rows()).filter(|&r| !train.cell(r, target_pos).is_missing()).collect();
        if rows.is_empty() {
            return Err(PipelineError::EmptyTrain);
        }
        let classes: Vec<String> = rows
            .iter()
            .filter_map(|&r| class_key(train.cell(r, target_pos)))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if classes.len() < 2 {
            return Err(PipelineError::DegenerateTarget(target.to_string()));
        }

        let mut blocks = Vec::new();
        for (c, spec) in train.columns().iter().enumerate() {
            if spec.name == target || Some(spec.name.as_str()) == train.index_column() {
                continue;
            }
            let kind = reference.and_then(|s| s.kind_of(&spec.name)).unwrap_or(spec.kind);
            match kind {
                ColumnKind::Numeric => {
                    let mut values: Vec<f64> = rows.iter().filter_map(|&r| numeric_value(train.cell(r, c))).collect();
                    blocks.push(FeatureBlock::Numeric { column: spec.name.clone(), median: median(&mut values) });
                }
                ColumnKind::Text if !config.text_features.contains(&spec.name) => {}
                ColumnKind::Categorical | ColumnKind::Text => {
                    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                    for &r in &rows {
                        if let Some(k) = category(train.cell(r, c)) {
                            *counts.entry(k).or_default() += 1;
                        }
                    }
                    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
                    // Most frequent first, ties broken lexicographically.
                    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
                    ranked.truncate(config.top_k);
                    blocks.push(FeatureBlock::OneHot {
                        column: spec.name.clone(),
                        vocabulary: ranked.into_iter().map(|(k, _)| k).collect(),
                    });
                }
            }
        }

        let mut pre = Preprocessor {
            target: target.to_string(),
            classes,
            blocks,
            means: Vec::new(),
            scales: Vec::new(),
            constant: Vec::new(),
        };
        let raw = pre.encode(train, &rows);
        let n = raw.rows() as f64;
        for j in 0..raw.cols() {
            let mean = raw.column(j).sum::<f64>() / n;
            let var = raw.column(j).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let first = raw.get(0, j);
            pre.constant.push(raw.column(j).all(|v| v == first));
            pre.means.push(mean);
            pre.scales.push(var.max(VARIANCE_FLOOR).sqrt());
        }
        let x = pre.standardize(raw);
        let y = rows
            .iter()
            .map(|&r| {
                let key = class_key(train.cell(r, target_pos)).expect("non-missing");
                pre.classes.binary_search(&key).expect("class fitted")
            })
            .collect();
        Ok((x, y, pre))
    }

    pub fn n_features(&self) -> usize {
        self.blocks.iter().map(FeatureBlock::width).sum()
    }

    /// Imputed and one-hot encoded, not yet standardized.
    fn encode(&self, table: &Table, rows: &[usize]) -> Matrix {
        let positions: Vec<Option<usize>> = self.blocks.iter().map(|b| table.column_position(b.column())).collect();
        let mut out = Matrix::zeros(rows.len(), self.n_features());
        for (i, &r) in rows.iter().enumerate() {
            let dst = out.row_mut(i);
            let mut off = 0;
            for (block, pos) in self.blocks.iter().zip(&positions) {
                let cell = pos.map_or(&Cell::Missing, |p| table.cell(r, p));
                match block {
                    FeatureBlock::Numeric { median, .. } => dst[off] = numeric_value(cell).unwrap_or(*median),
                    FeatureBlock::OneHot { vocabulary, .. } => {
                        let slot = match category(cell) {
                            None => vocabulary.len() + 1,
                            Some(k) => vocabulary.iter().position(|v| *v == k).unwrap_or(vocabulary.len()),
                        };
                        dst[off + slot] = 1.0;
                    }
                }
                off += block.width();
            }
        }
        out
    }

    fn standardize(&self, mut m: Matrix) -> Matrix {
        for r in 0..m.rows() {
            for (j, v) in m.row_mut(r).iter_mut().enumerate() {
                *v = if self.constant[j] { 0.0 } else { (*v - self.means[j]) / self.scales[j] };
            }
        }
        m
    }

    /// Feature matrix for every row of `table` using fitted statistics only.
    pub fn transform(&self, table: &Table) -> Matrix {
        let rows: Vec<usize> = (0..table.n_rows()).collect();
        self.standardize(self.encode(table, &rows))
    }

    /// Number of kept categories per one-hot column.
    pub fn category_counts(&self) -> BTreeMap<String, usize> {
        self.blocks
            .iter()
            .filter_map(|b| match b {
                FeatureBlock::OneHot { column, vocabulary } => Some((column.clone(), vocabulary.len())),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csv_io::{parse_csv, CsvOptions};

    fn cfg() -> PipelineConfig {
        PipelineConfig::default()
    }

    #[test]
    fn median_imputation() {
        let t = parse_csv(b"x,y\n1.0,a\n,b\n3.0,a\n", &CsvOptions::default()).unwrap();
        let (_, _, pre) = Preprocessor::fit(&t, "y", &cfg(), None).unwrap();
        assert_eq!(pre.blocks[0], FeatureBlock::Numeric { column: "x".into(), median: 2.0 });
        let raw = pre.encode(&t, &[0, 1, 2]);
        assert_eq!(raw.column(0).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn constant_column_standardizes_to_zero() {
        let t = parse_csv(b"x,y\n0.1,a\n0.1,b\n0.1,a\n", &CsvOptions::default()).unwrap();
        let (x, _, _) = Preprocessor::fit(&t, "y", &cfg(), None).unwrap();
        assert!(x.column(0).all(|v| v == 0.0));
    }

    #[test]
    fn sixty_categories_with_k_fifty() {
        let mut csv = String::from("c,y\n");
        for i in 0..60 {
            // Category i appears (i % 5) + 1 times.
            for _ in 0..(i % 5) + 1 {
                csv.push_str(&format!("cat{i:02},{}\n", i % 2));
            }
        }
        let t = parse_csv(csv.as_bytes(), &CsvOptions::default()).unwrap();
        let (x, _, pre) = Preprocessor::fit(&t, "y", &cfg(), None).unwrap();
        // Brute-force tally of distinct values.
        let distinct: BTreeSet<String> = t.column_cells(0).map(Cell::to_field).collect();
        assert_eq!(distinct.len(), 60);
        assert_eq!(x.cols(), 50 + 2);
        let FeatureBlock::OneHot { vocabulary, .. } = &pre.blocks[0] else { panic!() };
        // Twelve categories appear 5 times, twelve 4 times, ... ties resolved by name.
        assert_eq!(vocabulary[0], "cat04");
        assert_eq!(vocabulary[11], "cat59");
        assert_eq!(vocabulary[12], "cat03");
    }

    #[test]
    fn index_and_text_columns_are_not_features() {
        let t = parse_csv(b"_competition_index,x,note,y\n0,1,hello,a\n1,2,world,b\n", &CsvOptions::default().with_kinds([("note", ColumnKind::Text)]))
            .unwrap();
        let (x, _, pre) = Preprocessor::fit(&t, "y", &cfg(), None).unwrap();
        assert_eq!(pre.blocks.len(), 1);
        assert_eq!(x.cols(), 1);
        let with_text = PipelineConfig { text_features: vec!["note".into()], ..cfg() };
        let (_, _, pre) = Preprocessor::fit(&t, "y", &with_text, None).unwrap();
        assert_eq!(pre.blocks.len(), 2);
    }

    #[test]
    fn degenerate_and_empty_targets() {
        let t = parse_csv(b"x,y\n1,a\n2,a\n", &CsvOptions::default()).unwrap();
        assert!(matches!(Preprocessor::fit(&t, "y", &cfg(), None), Err(PipelineError::DegenerateTarget(_))));
        let t = parse_csv(b"x,y\n1,\n", &CsvOptions::default()).unwrap();
        assert!(matches!(Preprocessor::fit(&t, "y", &cfg(), None), Err(PipelineError::EmptyTrain)));
    }

    #[test]
    fn unseen_and_missing_categories_at_transform() {
        let train = parse_csv(b"c,y\na,0\nb,1\n", &CsvOptions::default()).unwrap();
        let test = parse_csv(b"c,y\nz,0\n,1\n", &CsvOptions::default()).unwrap();
        let (_, _, pre) = Preprocessor::fit(&train, "y", &cfg(), None).unwrap();
        let raw = pre.encode(&test, &[0, 1]);
        assert_eq!(raw.row(0), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(raw.row(1), &[0.0, 0.0, 0.0, 1.0]);
    }
}
