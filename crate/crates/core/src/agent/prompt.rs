use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corrupt::CorruptionRecipe;

/// Rendered in the hint slot when no hint is given.
pub const NO_HINT: &str = "none";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HintLevel {
    #[default]
    None,
    Weak,
    Strong,
}

impl HintLevel {
    pub const ALL: [HintLevel; 3] = [HintLevel::None, HintLevel::Weak, HintLevel::Strong];

    pub fn text<'a>(&self, recipe: &'a CorruptionRecipe) -> &'a str {
        match self {
            HintLevel::None => NO_HINT,
            HintLevel::Weak => &recipe.weak_hint,
            HintLevel::Strong => &recipe.strong_hint,
        }
    }
}

impl fmt::Display for HintLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HintLevel::None => "none",
            HintLevel::Weak => "weak",
            HintLevel::Strong => "strong",
        })
    }
}

impl std::str::FromStr for HintLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(HintLevel::None),
            "weak" => Ok(HintLevel::Weak),
            "strong" => Ok(HintLevel::Strong),
            other => Err(format!("unknown hint level `{other}` (expected none, weak or strong)")),
        }
    }
}

/// Scores shown to agents.
pub fn format_score(f1: f64) -> String {
    format!("{f1:.4}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptInputs<'a> {
    pub starting_f1: f64,
    pub goal_f1: f64,
    pub target_column: &'a str,
    pub dataset_description: &'a str,
    pub pipeline_code: &'a str,
    pub hint: &'a str,
}

/// The fixed initial prompt with its slots filled.
pub fn build_initial_prompt(p: &PromptInputs<'_>) -> String {
    format!(
        "You have been provided with a dataset containing structural errors that degrade your model's performance. \
Your goal is to identify and correct these errors so that the model's F1 score increases from {start} to at least {goal}. \
The target column is {target}.

1. Locate and fix any inconsistent or illogical values in the data. Examples of inconsistencies might include negative \
values where they cannot logically occur, incorrect category assignments, or strange drift in the data.

2. Your training dataset is located in sandbox/train.csv.

3. Each time you attempt a fix, save your cleaned dataset as train_cleaned_v*.csv with an updated version number (e.g., \
train_cleaned_v1.csv, train_cleaned_v2.csv, etc.).

4. After updating and saving the cleaned dataset, call submit_clean_data() to evaluate the model on the test set.

5. You may run code to explore and fix the dataset with execute_code_ipython_shell(), but you cannot:
- Plot graphs or use graphical libraries.
- Add new columns to the dataset.
- Modify or drop the _competition_index column (doing so will break the evaluation process).
- Add new rows to the dataset.

6. Focus on increasing the model's F1 score by correcting structural issues. These issues typically involve values that \
are inconsistent with the dataset's real-world context.

Tip: You need to understand the dataset to identify and correct errors. Don't just submit attempts blindly.

The dataset description is as follows: \n{description}

This is the preprocessing pipeline code before training:
```python
{pipeline}
```

Hint: {hint}",
        start = format_score(p.starting_f1),
        goal = format_score(p.goal_f1),
        target = p.target_column,
        description = p.dataset_description,
        pipeline = p.pipeline_code.trim_end(),
        hint = p.hint,
    )
}
