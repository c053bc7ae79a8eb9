//! Cleaning episodes: an agent, two tools and a token budget.
//!
//! The prompt at turn `j + 1` is the prompt at turn `j` followed by the
//! agent's output and the tool responses of turn `j`. Every submission is
//! gated, scored, archived and recorded; the highest score wins, earliest
//! first on ties.

pub mod conversation;
pub mod episode;
pub mod llm;
pub mod prompt;
pub mod replay;
pub mod scripted;
pub mod tokens;

use std::path::Path;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gate::ValidationVerdict;
use crate::pipeline::BaselineReport;
use crate::sandbox::{ExecResult, SandboxError, Session, WorkerCommand};

pub use conversation::{tool_specs, Conversation, Message, Role, ToolCall, ToolSpec, EXECUTE_CODE_TOOL, SUBMIT_TOOL};
pub use episode::{conversation_after, Episode, EpisodeError, EpisodeMeta, SubmissionSource, ToolResponseRecord, Turn};
pub use prompt::{build_initial_prompt, format_score, HintLevel, PromptInputs, NO_HINT};
pub use replay::{replay, ReplayError};
pub use tokens::{estimate_tokens, TokenAccount, TokenUsage};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentReply {
    pub content: String,
    pub tool_calls: Vec<ToolCall>,
    /// Provider-reported usage; estimated from text when absent.
    pub usage: Option<TokenUsage>,
}

impl AgentReply {
    pub fn text(content: impl Into<String>) -> Self {
        AgentReply { content: content.into(), ..Default::default() }
    }

    pub fn calls(content: impl Into<String>, tool_calls: Vec<ToolCall>) -> Self {
        AgentReply { content: content.into(), tool_calls, usage: None }
    }

    pub fn is_idle(&self) -> bool {
        self.tool_calls.is_empty() && self.content.trim().is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    /// Worth retrying: network failures, rate limits, server errors.
    #[error("agent transport error: {0}")]
    Transport(String),
    #[error("agent error: {0}")]
    Fatal(String),
}

pub trait Agent {
    fn name(&self) -> String;
    fn respond(&mut self, conversation: &Conversation, tools: &[ToolSpec]) -> Result<AgentReply, AgentError>;
}

/// Something that runs agent code in a persistent session.
pub trait CodeExecutor {
    fn execute(&mut self, code: &str) -> Result<ExecResult, SandboxError>;
}

impl CodeExecutor for Session {
    fn execute(&mut self, code: &str) -> Result<ExecResult, SandboxError> {
        self.exec(code)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AgentSpec {
    Llm {
        endpoint: String,
        model: String,
        #[serde(default)]
        temperature: Option<f64>,
        /// Tool calls honoured per reply; extra calls are answered with a
        /// refusal.
        #[serde(default = "default_tool_rounds")]
        max_tool_rounds: usize,
    },
    Scripted {
        policy: String,
    },
}

fn default_tool_rounds() -> usize {
    8
}

impl AgentSpec {
    pub fn label(&self) -> String {
        match self {
            AgentSpec::Llm { model, .. } => model.clone(),
            AgentSpec::Scripted { policy } => format!("scripted-{policy}"),
        }
    }

    pub fn max_tool_calls(&self) -> Option<usize> {
        match self {
            AgentSpec::Llm { max_tool_rounds, .. } => Some(*max_tool_rounds),
            AgentSpec::Scripted { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 5, base_delay_ms: 500, max_delay_ms: 8_000 }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << attempt.min(20)).min(self.max_delay_ms);
        Duration::from_millis(ms)
    }
}

fn default_budget() -> u64 {
    200_000
}

fn default_repeats() -> usize {
    6
}

fn default_exec_timeout() -> u64 {
    60
}

fn default_output_limit() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: String,
    /// Recipe id; the dataset's own recipe when absent.
    #[serde(default)]
    pub recipe: Option<String>,
    #[serde(default)]
    pub hint_level: HintLevel,
    #[serde(default = "default_budget")]
    pub token_budget: u64,
    /// Target rendered into the prompt; P_Clean when absent.
    #[serde(default)]
    pub goal_f1: Option<f64>,
    pub agent: AgentSpec,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub max_turns: Option<usize>,
    #[serde(default)]
    pub worker: Option<WorkerCommand>,
    #[serde(default = "default_exec_timeout")]
    pub exec_timeout_secs: u64,
    #[serde(default = "default_output_limit")]
    pub output_limit: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
}

impl RunConfig {
    pub fn new(dataset: &str, agent: AgentSpec) -> Self {
        RunConfig {
            dataset: dataset.to_string(),
            recipe: None,
            hint_level: HintLevel::None,
            token_budget: default_budget(),
            goal_f1: None,
            agent,
            repeats: default_repeats(),
            seed: None,
            max_turns: None,
            worker: None,
            exec_timeout_secs: default_exec_timeout(),
            output_limit: default_output_limit(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.token_budget == 0 {
            return Err("token_budget must be positive".into());
        }
        if let Some(g) = self.goal_f1 {
            if !(g > 0.0 && g <= 1.0) {
                return Err(format!("goal_f1 {g} outside (0, 1]"));
            }
        }
        if self.repeats == 0 {
            return Err("repeats must be at least 1".into());
        }
        Ok(())
    }

    pub fn recipe_id(&self) -> &str {
        self.recipe.as_deref().unwrap_or(&self.dataset)
    }

    pub fn run_id(&self, repeat: usize) -> String {
        format!("{}-{}-{}-r{}", self.dataset, self.agent.label(), self.hint_level, repeat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    /// 1-based.
    pub ordinal: usize,
    /// Path exactly as the agent gave it.
    pub path: String,
    pub source: SubmissionSource,
    pub verdict: ValidationVerdict,
    /// Present iff the verdict is Accepted.
    pub score: Option<f64>,
    pub turn: usize,
    pub cumulative_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Budget,
    Idle,
    MaxTurns,
    AgentError { message: String },
    SessionDead { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestSubmission {
    pub ordinal: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: String,
    pub dataset: String,
    pub agent: String,
    pub hint_level: HintLevel,
    pub baselines: BaselineReport,
    pub submissions: Vec<SubmissionRecord>,
    /// None when nothing was accepted.
    pub best: Option<BestSubmission>,
    /// Best accepted score, or P_Dirty when nothing was accepted.
    pub best_score: f64,
    /// `best_score - P_Dirty`; may be negative.
    pub improvement: f64,
    pub termination: Termination,
    pub turns: usize,
    pub total_tokens: u64,
    pub code_calls: usize,
    /// Code calls that created or changed a `train_cleaned_v*.csv` file.
    pub submission_code_calls: usize,
    pub transcript: String,
}

/// Highest accepted score, earliest submission on ties.
pub fn best_of(records: &[SubmissionRecord]) -> Option<BestSubmission> {
    let mut best: Option<BestSubmission> = None;
    for r in records {
        if let Some(score) = r.score {
            if best.as_ref().is_none_or(|b| score > b.score) {
                best = Some(BestSubmission { ordinal: r.ordinal, score });
            }
        }
    }
    best
}

/// Fill in best, improvement and the counters from the raw parts.
pub fn assemble_result(meta: &EpisodeMeta, turns: &[Turn], submissions: Vec<SubmissionRecord>, termination: Termination) -> RunResult {
    let best = best_of(&submissions);
    let p_dirty = meta.baselines.p_dirty;
    let best_score = best.as_ref().map_or(p_dirty, |b| b.score);
    let responses = turns.iter().flat_map(|t| &t.tool_responses);
    let code: Vec<&ToolResponseRecord> = responses.filter(|r| r.name == EXECUTE_CODE_TOOL).collect();
    RunResult {
        run_id: meta.run_id.clone(),
        dataset: meta.config.dataset.clone(),
        agent: meta.config.agent.label(),
        hint_level: meta.config.hint_level,
        baselines: meta.baselines,
        best,
        best_score,
        improvement: if submissions.iter().any(|s| s.score.is_some()) { best_score - p_dirty } else { 0.0 },
        submissions,
        termination,
        turns: turns.len(),
        total_tokens: turns.last().map_or(0, |t| t.cumulative_tokens),
        code_calls: code.len(),
        submission_code_calls: code.iter().filter(|r| r.wrote_submission == Some(true)).count(),
        transcript: episode::TRANSCRIPT_FILE.to_string(),
    }
}

/// Call the agent, retrying transport errors with exponential backoff.
pub fn respond_with_retry(
    agent: &mut dyn Agent,
    conversation: &Conversation,
    tools: &[ToolSpec],
    policy: &RetryPolicy,
) -> Result<AgentReply, AgentError> {
    let mut attempt = 0;
    loop {
        match agent.respond(conversation, tools) {
            Err(AgentError::Transport(_)) if attempt < policy.max_retries => {
                thread::sleep(policy.delay(attempt));
                attempt += 1;
            }
            other => return other,
        }
    }
}

/// Resolve an agent-supplied submission path against the sandbox root. The
/// prompt names files as `sandbox/...`, so that prefix is also accepted.
pub fn resolve_submission_path(root: &Path, raw: &str) -> std::path::PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        return p.to_path_buf();
    }
    let direct = root.join(p);
    if !direct.exists() {
        if let Ok(stripped) = p.strip_prefix("sandbox") {
            let alt = root.join(stripped);
            if alt.exists() {
                return alt;
            }
        }
    }
    direct
}
