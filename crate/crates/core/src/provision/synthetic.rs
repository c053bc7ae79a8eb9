use serde::{Deserialize, Serialize};

use super::{prepare_bundle, DatasetBundle, ProvisionError, TaskSpec};
use crate::rng::Substream;
use crate::table::{Cell, ColumnKind, ColumnSpec, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericFeature {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    /// Contribution of one standard deviation to the label score.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalFeature {
    pub name: String,
    pub categories: Vec<String>,
    /// Per-category additive offset to the label score.
    pub offsets: Vec<f64>,
}

/// A generated binary classification task.
///
/// Each row draws its numeric features as `mean + std * z` (rounded to two
/// decimals) and its categories uniformly. The label is `1` when
/// `bias + sum(weight * z) + sum(offset) + noise * e > 0`, with `z`
/// recomputed from the rounded value and `e` approximately standard normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    pub numeric: Vec<NumericFeature>,
    pub categorical: Vec<CategoricalFeature>,
    pub bias: f64,
    pub noise: f64,
    pub target_column: String,
    pub seed: u64,
    pub split_fraction: f64,
}

fn num(name: &str, mean: f64, std: f64, weight: f64) -> NumericFeature {
    NumericFeature { name: name.into(), mean, std, weight }
}

fn cat(name: &str, pairs: &[(&str, f64)]) -> CategoricalFeature {
    CategoricalFeature {
        name: name.into(),
        categories: pairs.iter().map(|p| p.0.to_string()).collect(),
        offsets: pairs.iter().map(|p| p.1).collect(),
    }
}

impl SyntheticSpec {
    /// 2000 customers, four numeric and two categorical features, binary
    /// churn label. Pairs with the `synthetic-default` recipe.
    pub fn desk_default(seed: u64) -> Self {
        SyntheticSpec {
            n_rows: 2000,
            numeric: vec![
                num("age", 42.0, 12.0, 1.4),
                num("income", 55.0, 18.0, 1.2),
                num("tenure", 6.0, 3.0, -0.8),
                num("balance", 1200.0, 400.0, 0.5),
            ],
            categorical: vec![
                cat("region", &[("north", 1.2), ("south", -1.2), ("east", 0.3), ("west", -0.3)]),
                cat("channel", &[("web", 0.4), ("branch", -0.4), ("phone", 0.0)]),
            ],
            bias: 0.0,
            noise: 0.6,
            target_column: "label".into(),
            seed,
            split_fraction: 0.8,
        }
    }

    pub fn description(&self) -> String {
        let mut s = format!(
            "Synthetic customer table with {} rows. The target column `{}` is 1 for customers who churned and 0 \
             otherwise.",
            self.n_rows, self.target_column
        );
        for f in &self.numeric {
            s.push_str(&format!(" `{}` is numeric.", f.name));
        }
        for f in &self.categorical {
            s.push_str(&format!(" `{}` takes values {}.", f.name, f.categories.join(", ")));
        }
        s
    }

    pub fn task(&self) -> TaskSpec {
        TaskSpec {
            positive_label: Some("1".into()),
            split_fraction: self.split_fraction,
            split_seed: self.seed,
            dataset_description: self.description(),
            ..TaskSpec::new(&self.target_column)
        }
    }

    fn validate(&self) -> Result<(), ProvisionError> {
        let invalid = |m: String| ProvisionError::InvalidSpec(m);
        if self.n_rows < 2 {
            return Err(invalid("need at least two rows".into()));
        }
        if self.numeric.is_empty() && self.categorical.is_empty() {
            return Err(invalid("no features".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(invalid(format!("noise {} must be finite and non-negative", self.noise)));
        }
        let mut names = std::collections::BTreeSet::new();
        for n in self.numeric.iter().map(|f| &f.name).chain(self.categorical.iter().map(|f| &f.name)) {
            if n == &self.target_column || !names.insert(n) {
                return Err(invalid(format!("duplicate column `{n}`")));
            }
        }
        for f in &self.numeric {
            if !(f.std > 0.0) {
                return Err(invalid(format!("feature `{}` needs a positive std", f.name)));
            }
        }
        for f in &self.categorical {
            if f.categories.is_empty() || f.categories.len() != f.offsets.len() {
                return Err(invalid(format!("feature `{}` needs one offset per category", f.name)));
            }
            if f.categories.iter().any(|c| c.is_empty() || c.parse::<f64>().is_ok()) {
                return Err(invalid(format!("feature `{}` has an empty or numeric-looking category", f.name)));
            }
        }
        Ok(())
    }

    /// The label rule without noise, evaluated on a row's feature values.
    pub fn score(&self, numeric: &[f64], categories: &[usize]) -> f64 {
        let mut s = self.bias;
        for (f, v) in self.numeric.iter().zip(numeric) {
            s += f.weight * (v - f.mean) / f.std;
        }
        for (f, &c) in self.categorical.iter().zip(categories) {
            s += f.offsets[c];
        }
        s
    }

    /// The full raw table (before split and indexing).
    pub fn generate_table(&self) -> Result<Table, ProvisionError> {
        self.validate()?;
        let mut rng = Substream::new(self.seed, "synthetic/rows");
        let mut columns: Vec<ColumnSpec> =
            self.numeric.iter().map(|f| ColumnSpec { name: f.name.clone(), kind: ColumnKind::Numeric }).collect();
        columns.extend(self.categorical.iter().map(|f| ColumnSpec { name: f.name.clone(), kind: ColumnKind::Categorical }));
        columns.push(ColumnSpec { name: self.target_column.clone(), kind: ColumnKind::Numeric });

        let mut rows = Vec::with_capacity(self.n_rows);
        for _ in 0..self.n_rows {
            let values: Vec<f64> = self
                .numeric
                .iter()
                .map(|f| ((f.mean + f.std * rng.standard_normal()) * 100.0).round() / 100.0)
                .collect();
            let cats: Vec<usize> = self.categorical.iter().map(|f| rng.below(f.categories.len() as u64) as usize).collect();
            let noise = self.noise * rng.standard_normal();
            let label = if self.score(&values, &cats) + noise > 0.0 { 1.0 } else { 0.0 };
            let mut row: Vec<Cell> = values.into_iter().map(Cell::Number).collect();
            row.extend(cats.iter().zip(&self.categorical).map(|(&c, f)| Cell::Text(f.categories[c].clone())));
            row.push(Cell::Number(label));
            rows.push(row);
        }
        Ok(Table::new(columns, rows, None)?)
    }
}

/// Generate, split and index a synthetic dataset.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<DatasetBundle, ProvisionError> {
    let raw = spec.generate_table()?;
    prepare_bundle(&raw, &spec.task(), &format!("synthetic:{}", spec.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csv_io::to_csv_bytes;

    #[test]
    fn zero_noise_labels_follow_the_rule() {
        let spec = SyntheticSpec { noise: 0.0, n_rows: 300, ..SyntheticSpec::desk_default(5) };
        let t = spec.generate_table().unwrap();
        for row in t.rows() {
            let values: Vec<f64> = row[..4].iter().map(|c| c.as_f64().unwrap()).collect();
            let cats: Vec<usize> = spec
                .categorical
                .iter()
                .zip(&row[4..6])
                .map(|(f, c)| f.categories.iter().position(|x| Some(x.as_str()) == c.as_str()).unwrap())
                .collect();
            let expected = if spec.score(&values, &cats) > 0.0 { 1.0 } else { 0.0 };
            assert_eq!(row[6], Cell::Number(expected));
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_synthetic(&SyntheticSpec::desk_default(7)).unwrap();
        let b = generate_synthetic(&SyntheticSpec::desk_default(7)).unwrap();
        assert_eq!(to_csv_bytes(&a.train_clean), to_csv_bytes(&b.train_clean));
        assert_eq!(to_csv_bytes(&a.test_clean), to_csv_bytes(&b.test_clean));
        let c = generate_synthetic(&SyntheticSpec::desk_default(8)).unwrap();
        assert_ne!(to_csv_bytes(&a.train_clean), to_csv_bytes(&c.train_clean));
    }

    #[test]
    fn both_classes_present_and_balanced_enough() {
        let b = generate_synthetic(&SyntheticSpec::desk_default(7)).unwrap();
        let y = b.train_clean.column_position("label").unwrap();
        let pos = b.train_clean.column_cells(y).filter(|c| **c == Cell::Number(1.0)).count();
        let share = pos as f64 / b.train_clean.n_rows() as f64;
        assert!((0.3..0.7).contains(&share), "positive share {share}");
        assert_eq!(b.train_clean.n_rows(), 1600);
    }

    #[test]
    fn invalid_specs() {
        let mut s = SyntheticSpec::desk_default(1);
        s.categorical[0].offsets.pop();
        assert!(matches!(generate_synthetic(&s), Err(ProvisionError::InvalidSpec(_))));
        let mut s = SyntheticSpec::desk_default(1);
        s.numeric[0].std = 0.0;
        assert!(matches!(generate_synthetic(&s), Err(ProvisionError::InvalidSpec(_))));
    }
}
