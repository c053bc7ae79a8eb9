//! Deterministic agents for tests and calibration runs.

use std::collections::VecDeque;
use std::path::PathBuf;

use super::conversation::{Conversation, ToolCall, ToolSpec};
use super::{Agent, AgentError, AgentReply};
use crate::corrupt::{invert, GroundTruthLog};
use crate::csv_io::{load_csv_with, save_csv, CsvOptions};
use crate::table::Schema;

pub const POLICIES: [&str; 3] = ["noop", "oracle", "budget"];

/// Replies with a fixed script, then stays silent.
#[derive(Debug, Clone, Default)]
pub struct SequenceAgent {
    replies: VecDeque<AgentReply>,
}

impl SequenceAgent {
    pub fn new(replies: impl IntoIterator<Item = AgentReply>) -> Self {
        SequenceAgent { replies: replies.into_iter().collect() }
    }
}

impl Agent for SequenceAgent {
    fn name(&self) -> String {
        "scripted-sequence".into()
    }

    fn respond(&mut self, _: &Conversation, _: &[ToolSpec]) -> Result<AgentReply, AgentError> {
        Ok(self.replies.pop_front().unwrap_or_default())
    }
}

/// Submits the dirty training file once, unchanged.
pub fn noop_agent() -> SequenceAgent {
    SequenceAgent::new([AgentReply::calls("Submitting the training data unchanged.", vec![ToolCall::submit("", "sandbox/train.csv")])])
}

/// Restores the clean table from the ground-truth log, saves it as
/// `train_cleaned_v1.csv` in the sandbox and submits it. It writes the file
/// itself rather than through the code tool.
#[derive(Debug, Clone)]
pub struct OracleAgent {
    sandbox: PathBuf,
    log: GroundTruthLog,
    schema: Schema,
    done: bool,
}

impl OracleAgent {
    pub fn new(sandbox: impl Into<PathBuf>, log: GroundTruthLog, schema: Schema) -> Self {
        OracleAgent { sandbox: sandbox.into(), log, schema, done: false }
    }
}

impl Agent for OracleAgent {
    fn name(&self) -> String {
        "scripted-oracle".into()
    }

    fn respond(&mut self, _: &Conversation, _: &[ToolSpec]) -> Result<AgentReply, AgentError> {
        if self.done {
            return Ok(AgentReply::default());
        }
        self.done = true;
        let opts = CsvOptions {
            index_column: self.schema.index_column.clone(),
            kind_overrides: self.schema.columns.iter().map(|c| (c.name.clone(), c.kind)).collect(),
        };
        let fatal = |e: &dyn std::fmt::Display| AgentError::Fatal(e.to_string());
        let dirty = load_csv_with(self.sandbox.join("train.csv"), &opts).map_err(|e| fatal(&e))?;
        let clean = invert(&dirty, &self.log).map_err(|e| fatal(&e))?;
        save_csv(&clean, self.sandbox.join("train_cleaned_v1.csv")).map_err(|e| fatal(&e))?;
        Ok(AgentReply::calls(
            format!("Reverted {} logged cell edits.", self.log.len()),
            vec![ToolCall::submit("", "train_cleaned_v1.csv")],
        ))
    }
}

/// Emits `chars` characters of text every turn and never calls a tool.
#[derive(Debug, Clone)]
pub struct BudgetAgent {
    chars: usize,
}

impl BudgetAgent {
    pub fn new(chars: usize) -> Self {
        BudgetAgent { chars: chars.max(1) }
    }
}

impl Agent for BudgetAgent {
    fn name(&self) -> String {
        "scripted-budget".into()
    }

    fn respond(&mut self, _: &Conversation, _: &[ToolSpec]) -> Result<AgentReply, AgentError> {
        Ok(AgentReply::text("x".repeat(self.chars)))
    }
}
