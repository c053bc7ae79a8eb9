use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{fetch_dataset, generate_synthetic, prepare_bundle, recipe_for, DatasetBundle, ProvisionError, SourceDescriptor, SyntheticSpec, TaskSpec};
use crate::corrupt::CorruptionRecipe;
use crate::csv_io::{load_csv_with, CsvOptions};

/// One dataset in `datasets.toml`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    #[serde(default)]
    pub source: Option<SourceDescriptor>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub task: Option<TaskSpec>,
    /// Recipe file; the built-in recipe for the id is used when absent.
    #[serde(default)]
    pub recipe: Option<PathBuf>,
}

/// The `datasets.toml` file: a table of dataset entries keyed by id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetsFile {
    #[serde(default)]
    pub datasets: BTreeMap<String, DatasetEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl DatasetsFile {
    pub fn load(path: &Path) -> Result<Self, ProvisionError> {
        let text = fs::read_to_string(path).map_err(|e| ProvisionError::Config(format!("{}: {e}", path.display())))?;
        let mut file: DatasetsFile = toml::from_str(&text).map_err(|e| ProvisionError::Config(e.to_string()))?;
        file.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(file)
    }

    /// Build the clean bundle and the recipe for `id`.
    ///
    /// `seed` replaces the split seed, the synthetic generation seed and the
    /// recipe's master seed. `synthetic-default` works without any entry.
    pub fn build(&self, id: &str, seed: Option<u64>) -> Result<(DatasetBundle, CorruptionRecipe), ProvisionError> {
        let entry = match self.datasets.get(id) {
            Some(e) => e.clone(),
            None if id == "synthetic-default" => DatasetEntry::default(),
            None => return Err(ProvisionError::UnknownDataset(id.to_string())),
        };
        let mut recipe = match &entry.recipe {
            Some(p) => {
                let p = if p.is_absolute() { p.clone() } else { self.base_dir.join(p) };
                CorruptionRecipe::load(&p).map_err(|e| ProvisionError::Config(e.to_string()))?
            }
            None => recipe_for(id)?,
        };
        if let Some(s) = seed {
            recipe.master_seed = s;
        }

        let bundle = if let Some(src) = &entry.source {
            let mut task = entry.task.clone().ok_or_else(|| ProvisionError::Config(format!("dataset `{id}` has a source but no task")))?;
            if let Some(s) = seed {
                task.split_seed = s;
            }
            let mut src = src.clone();
            if let Some(dir) = &src.cache_dir {
                if dir.is_relative() {
                    src.cache_dir = Some(self.base_dir.join(dir));
                }
            }
            let path = fetch_dataset(&src)?;
            let raw = load_csv_with(&path, &CsvOptions::raw())?;
            prepare_bundle(&raw, &task, &src.url)?
        } else {
            let mut spec = entry.synthetic.clone().unwrap_or_else(|| SyntheticSpec::desk_default(0));
            if let Some(s) = seed {
                spec.seed = s;
            }
            let mut bundle = generate_synthetic(&spec)?;
            if let Some(task) = &entry.task {
                bundle.task.dataset_description = task.dataset_description.clone();
            }
            bundle
        };
        Ok((bundle, recipe))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provision::sha256_hex;

    #[test]
    fn synthetic_default_needs_no_entry() {
        let (bundle, recipe) = DatasetsFile::default().build("synthetic-default", Some(7)).unwrap();
        assert_eq!(recipe.master_seed, 7);
        assert_eq!(bundle.provenance.seed, 7);
        assert!(matches!(DatasetsFile::default().build("titanic", None), Err(ProvisionError::UnknownDataset(_))));
    }

    #[test]
    fn file_source_with_task() {
        let dir = tempfile::tempdir().unwrap();
        let mut csv = String::from("PassengerId,Survived,Name,Sex,Age,Fare\n");
        for i in 0..40 {
            let title = if i % 3 == 0 { "Mrs." } else { "Mr." };
            csv.push_str(&format!("{i},{},\"Doe, {title} X\",{},{},{}\n", i % 2, if i % 3 == 0 { "female" } else { "male" }, 20 + i, 7.5 + i as f64));
        }
        fs::write(dir.path().join("titanic.csv"), &csv).unwrap();
        let toml = format!(
            r#"
[datasets.titanic]
source = {{ url = "file://{}", expected_checksum = "{}", cache_dir = "cache" }}
task = {{ target_column = "Survived", dropped_columns = ["PassengerId"], positive_label = "1" }}
"#,
            dir.path().join("titanic.csv").display(),
            sha256_hex(csv.as_bytes())
        );
        fs::write(dir.path().join("datasets.toml"), toml).unwrap();
        let file = DatasetsFile::load(&dir.path().join("datasets.toml")).unwrap();
        let (bundle, recipe) = file.build("titanic", Some(3)).unwrap();
        assert_eq!(recipe.name, "titanic");
        assert_eq!(bundle.train_clean.n_rows() + bundle.test_clean.n_rows(), 40);
        assert!(bundle.train_clean.column_position("PassengerId").is_none());
        assert!(dir.path().join("cache/titanic.csv").exists());
    }
}
