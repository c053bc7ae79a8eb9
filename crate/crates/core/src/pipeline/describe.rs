use std::fmt::Write;

use super::{ModelConfig, PipelineConfig};
use crate::provision::TaskSpec;

/// Python-flavoured rendering of the preprocessing and training steps, shown
/// to agents in the initial prompt. It documents behaviour; nothing executes
/// it.
pub fn describe_pipeline(task: &TaskSpec, config: &PipelineConfig) -> String {
    let mut s = String::new();
    let target = &task.target_column;
    let index = &task.index_column;
    let _ = writeln!(s, "import pandas as pd");
    let _ = writeln!(s, "import numpy as np");
    let _ = writeln!(s);
    let _ = writeln!(s, "def preprocess(train: pd.DataFrame, test: pd.DataFrame):");
    let _ = writeln!(s, "    y_train = train.pop({target:?}).astype(str)");
    let _ = writeln!(s, "    y_test = test.pop({target:?}).astype(str)");
    let _ = writeln!(s, "    train = train.drop(columns=[{index:?}])");
    let _ = writeln!(s, "    test = test.drop(columns=[{index:?}])");
    if config.text_features.is_empty() {
        let _ = writeln!(s, "    # free-text columns are dropped");
    } else {
        let _ = writeln!(s, "    # free-text columns other than {:?} are dropped", config.text_features);
    }
    let _ = writeln!(s, "    for col in numeric_columns(train):");
    let _ = writeln!(s, "        median = train[col].median()");
    let _ = writeln!(s, "        train[col] = train[col].fillna(median)");
    let _ = writeln!(s, "        test[col] = test[col].fillna(median)");
    let _ = writeln!(s, "    for col in categorical_columns(train):");
    let _ = writeln!(s, "        counts = train[col].dropna().astype(str).value_counts()");
    let _ = writeln!(s, "        # ties in frequency are broken by category name");
    let _ = writeln!(s, "        keep = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:{}]", config.top_k);
    let _ = writeln!(s, "        keep = [k for k, _ in keep]");
    let _ = writeln!(s, "        for frame in (train, test):");
    let _ = writeln!(s, "            v = frame[col].astype(str).where(frame[col].notna(), \"__MISSING__\")");
    let _ = writeln!(s, "            v = v.where(v.isin(keep + [\"__MISSING__\"]), \"__OTHER__\")");
    let _ = writeln!(s, "            for k in keep + [\"__OTHER__\", \"__MISSING__\"]:");
    let _ = writeln!(s, "                frame[f\"{{col}}={{k}}\"] = (v == k).astype(float)");
    let _ = writeln!(s, "            frame.drop(columns=[col], inplace=True)");
    let _ = writeln!(s, "    mean = train.mean()");
    let _ = writeln!(s, "    std = np.sqrt(np.maximum(train.var(ddof=0), 1e-12))");
    let _ = writeln!(s, "    constant = train.nunique() <= 1");
    let _ = writeln!(s, "    X_train = ((train - mean) / std).where(~constant, 0.0)");
    let _ = writeln!(s, "    X_test = ((test - mean) / std).where(~constant, 0.0)");
    let _ = writeln!(s, "    return X_train, y_train, X_test, y_test");
    let _ = writeln!(s);
    match &config.model {
        ModelConfig::LogisticRegression { l2, max_iter, tol } => {
            let _ = writeln!(s, "# logistic regression, loss = mean cross-entropy + {l2} * ||w||^2 (intercept not penalized)");
            let _ = writeln!(s, "model = LogisticRegression(l2={l2}, max_iter={max_iter}, tol={tol})");
        }
        ModelConfig::DecisionTree { max_depth, min_samples_leaf } => {
            let _ = writeln!(s, "model = DecisionTreeClassifier(criterion=\"gini\", max_depth={max_depth}, min_samples_leaf={min_samples_leaf})");
        }
    }
    let _ = writeln!(s, "model.fit(X_train, y_train)");
    match &task.positive_label {
        Some(pos) => {
            let _ = writeln!(s, "score = f1_score(y_test, model.predict(X_test), pos_label={pos:?})");
        }
        None => {
            let _ = writeln!(s, "score = f1_score(y_test, model.predict(X_test), average=\"macro\")");
        }
    }
    s
}
