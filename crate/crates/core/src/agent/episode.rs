//! On-disk episode: staging, the turn loop and the artifacts it leaves.
//!
//! ```text
//! <episode>/episode.json              configs, baselines, initial prompt, termination
//! <episode>/transcript.jsonl          one Turn per line
//! <episode>/result.json               RunResult
//! <episode>/sandbox/                  worker cwd: train.csv and train_cleaned_v*.csv
//! <episode>/submissions/<i>.csv       byte copy of every readable submission
//! <episode>/harness/                  test split, gate reference, ground-truth log
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::conversation::{tool_specs, Conversation, Message, ToolCall, EXECUTE_CODE_TOOL, SUBMIT_TOOL};
use super::prompt::{build_initial_prompt, format_score, PromptInputs};
use super::tokens::{estimate_conversation, estimate_message, TokenAccount, TokenUsage};
use super::{
    assemble_result, resolve_submission_path, respond_with_retry, Agent, CodeExecutor, RunConfig, RunResult,
    SubmissionRecord, Termination,
};
use crate::corrupt::{CorruptionRecipe, GroundTruthLog};
use crate::csv_io::{parse_csv, to_csv_bytes, CsvError, CsvOptions};
use crate::gate::{validate_bytes, GateReference, Outcome, ValidationVerdict};
use crate::pipeline::{compute_baselines, describe_pipeline, BaselineReport, Evaluator, PipelineConfig, PipelineError};
use crate::provision::{sha256_hex, DatasetBundle, TaskSpec};
use crate::sandbox::ExecResult;

pub const META_FILE: &str = "episode.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const RESULT_FILE: &str = "result.json";
pub const SANDBOX_DIR: &str = "sandbox";
pub const SUBMISSIONS_DIR: &str = "submissions";
pub const HARNESS_DIR: &str = "harness";
pub const TEST_FILE: &str = "test_clean.csv";
pub const GATE_FILE: &str = "gate_reference.json";
pub const LOG_FILE: &str = "ground_truth_log.csv";

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error("episode directory `{0}` already holds an episode")]
    AlreadyExists(PathBuf),
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error("bundle has no dirty training table")]
    NoDirtyTable,
    #[error("i/o error on `{path}`: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad JSON in `{path}`: {reason}")]
    Json { path: PathBuf, reason: String },
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> EpisodeError + '_ {
    move |source| EpisodeError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), EpisodeError> {
    fs::write(path, bytes).map_err(io_err(path))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, EpisodeError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|e| EpisodeError::Json { path: path.to_path_buf(), reason: e.to_string() })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), EpisodeError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    write_file(path, &bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    pub run_id: String,
    pub config: RunConfig,
    pub pipeline: PipelineConfig,
    pub task: TaskSpec,
    pub baselines: BaselineReport,
    pub goal_f1: f64,
    pub initial_prompt: String,
    /// Written when the episode ends.
    #[serde(default)]
    pub termination: Option<Termination>,
}

/// Where the bytes of a submission came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubmissionSource {
    /// Copied to `file`, relative to the episode directory.
    Archived { file: String, sha256: String },
    NotFound,
    OutsideSandbox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponseRecord {
    pub call_id: String,
    pub name: String,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exec: Option<ExecResult>,
    /// For code calls run in a sandbox: whether a `train_cleaned_v*.csv`
    /// appeared or changed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrote_submission: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub submission: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SubmissionSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    /// 1-based.
    pub ordinal: usize,
    pub output: String,
    pub tool_calls: Vec<ToolCall>,
    pub tool_responses: Vec<ToolResponseRecord>,
    pub usage: TokenUsage,
    pub cumulative_tokens: u64,
}

impl Turn {
    /// Messages this turn appends to the conversation.
    pub fn messages(&self) -> Vec<Message> {
        let mut out = vec![Message::assistant(self.output.clone(), self.tool_calls.clone())];
        for (call, resp) in self.tool_calls.iter().zip(&self.tool_responses) {
            out.push(Message::tool(call, resp.content.clone()));
        }
        out
    }
}

/// Conversation presented before turn `turns.len() + 1`.
pub fn conversation_after(initial_prompt: &str, turns: &[Turn]) -> Conversation {
    let mut c = Conversation::new(initial_prompt);
    for t in turns {
        for m in t.messages() {
            c.push(m);
        }
    }
    c
}

pub fn not_found_verdict(raw: &str) -> ValidationVerdict {
    ValidationVerdict {
        outcome: Outcome::DatasetNotFound,
        detail: format!("dataset path `{raw}` does not exist"),
        offending: vec![raw.to_string()],
    }
}

pub fn outside_verdict(raw: &str) -> ValidationVerdict {
    ValidationVerdict {
        outcome: Outcome::Other,
        detail: format!("dataset path `{raw}` is outside the sandbox"),
        offending: vec![raw.to_string()],
    }
}

/// Gate then score. Evaluation failures on a gated file become `Other`.
pub(crate) fn judge(evaluator: &Evaluator, gate: &GateReference, bytes: &[u8]) -> (ValidationVerdict, Option<f64>) {
    let verdict = validate_bytes(bytes, gate);
    if !verdict.is_accepted() {
        return (verdict, None);
    }
    match evaluator.evaluate_bytes(bytes) {
        Ok(r) => (verdict, Some(r.f1)),
        Err(e) => (ValidationVerdict::other(format!("the pipeline could not be trained on this file: {e}")), None),
    }
}

pub(crate) fn submission_response(ordinal: usize, raw: &str, verdict: &ValidationVerdict, score: Option<f64>, p_dirty: f64) -> String {
    match score {
        Some(s) => format!(
            "Submission {ordinal} ({raw}) accepted. F1 score: {}. Starting F1 score: {}.",
            format_score(s),
            format_score(p_dirty)
        ),
        None => format!("Submission {ordinal} ({raw}) rejected: {}. {}", verdict.outcome, verdict.detail),
    }
}

fn is_submission_file(name: &str) -> bool {
    name.starts_with("train_cleaned_v") && name.ends_with(".csv")
}

/// Hash of every submission-named file directly under `root`.
pub fn snapshot_submissions(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    if let Ok(entries) = fs::read_dir(root) {
        for e in entries.flatten() {
            let name = e.file_name().to_string_lossy().into_owned();
            if is_submission_file(&name) {
                if let Ok(bytes) = fs::read(e.path()) {
                    out.insert(name, sha256_hex(&bytes));
                }
            }
        }
    }
    out
}

fn wrote_submission(before: &BTreeMap<String, String>, after: &BTreeMap<String, String>) -> bool {
    after.iter().any(|(k, v)| before.get(k) != Some(v))
}

/// A staged episode ready to run, or a finished one being replayed.
#[derive(Debug)]
pub struct Episode {
    dir: PathBuf,
    meta: EpisodeMeta,
    evaluator: Evaluator,
    gate: GateReference,
}

impl Episode {
    /// Stage a fresh episode in `dir`: write the dirty train file into the
    /// sandbox, compute baselines and render the initial prompt.
    pub fn prepare(
        dir: &Path,
        run_id: &str,
        config: &RunConfig,
        bundle: &DatasetBundle,
        recipe: &CorruptionRecipe,
        log: Option<&GroundTruthLog>,
        pipeline: &PipelineConfig,
    ) -> Result<Episode, EpisodeError> {
        config.validate().map_err(EpisodeError::InvalidConfig)?;
        if dir.join(META_FILE).exists() || dir.join(TRANSCRIPT_FILE).exists() {
            return Err(EpisodeError::AlreadyExists(dir.to_path_buf()));
        }
        let dirty = bundle.train_dirty.as_ref().ok_or(EpisodeError::NoDirtyTable)?;
        let baselines = compute_baselines(bundle, pipeline)?;
        let goal_f1 = config.goal_f1.unwrap_or(baselines.p_clean);
        let pipeline_code = describe_pipeline(&bundle.task, pipeline);
        let initial_prompt = build_initial_prompt(&PromptInputs {
            starting_f1: baselines.p_dirty,
            goal_f1,
            target_column: &bundle.task.target_column,
            dataset_description: &bundle.task.dataset_description,
            pipeline_code: &pipeline_code,
            hint: config.hint_level.text(recipe),
        });

        for sub in [SANDBOX_DIR, SUBMISSIONS_DIR, HARNESS_DIR] {
            let p = dir.join(sub);
            fs::create_dir_all(&p).map_err(io_err(&p))?;
        }
        let sandbox = dir.join(SANDBOX_DIR);
        write_file(&sandbox.join("train.csv"), &to_csv_bytes(dirty))?;
        // Code run with the sandbox as cwd can then use the `sandbox/train.csv`
        // path the prompt mentions.
        #[cfg(unix)]
        {
            let link = sandbox.join(SANDBOX_DIR);
            if !link.exists() {
                std::os::unix::fs::symlink(".", &link).map_err(io_err(&link))?;
            }
        }
        let harness = dir.join(HARNESS_DIR);
        write_file(&harness.join(TEST_FILE), &to_csv_bytes(&bundle.test_clean))?;
        let gate = GateReference::for_bundle(bundle);
        write_json(&harness.join(GATE_FILE), &gate)?;
        if let Some(log) = log {
            write_file(&harness.join(LOG_FILE), &log.to_csv_bytes())?;
        }

        let meta = EpisodeMeta {
            run_id: run_id.to_string(),
            config: config.clone(),
            pipeline: pipeline.clone(),
            task: bundle.task.clone(),
            baselines,
            goal_f1,
            initial_prompt,
            termination: None,
        };
        write_json(&dir.join(META_FILE), &meta)?;
        let evaluator = Evaluator::new(bundle, pipeline);
        Ok(Episode { dir: dir.to_path_buf(), meta, evaluator, gate })
    }

    /// Load a staged or finished episode from disk.
    pub fn open(dir: &Path) -> Result<Episode, EpisodeError> {
        let meta: EpisodeMeta = read_json(&dir.join(META_FILE))?;
        let gate: GateReference = read_json(&dir.join(HARNESS_DIR).join(GATE_FILE))?;
        let test_path = dir.join(HARNESS_DIR).join(TEST_FILE);
        let bytes = fs::read(&test_path).map_err(io_err(&test_path))?;
        let opts = CsvOptions {
            index_column: Some(meta.task.index_column.clone()),
            kind_overrides: gate.schema.columns.iter().map(|c| (c.name.clone(), c.kind)).collect(),
        };
        let test = parse_csv(&bytes, &opts)?;
        let evaluator = Evaluator::from_parts(test, gate.schema.clone(), meta.task.clone(), meta.pipeline.clone());
        Ok(Episode { dir: dir.to_path_buf(), meta, evaluator, gate })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn sandbox(&self) -> PathBuf {
        self.dir.join(SANDBOX_DIR)
    }

    pub fn meta(&self) -> &EpisodeMeta {
        &self.meta
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.evaluator
    }

    pub fn gate(&self) -> &GateReference {
        &self.gate
    }

    pub(crate) fn judge_source(&self, source: &SubmissionSource, raw: &str, bytes: Option<&[u8]>) -> (ValidationVerdict, Option<f64>) {
        match (source, bytes) {
            (SubmissionSource::Archived { .. }, Some(b)) => judge(&self.evaluator, &self.gate, b),
            (SubmissionSource::OutsideSandbox, _) => (outside_verdict(raw), None),
            _ => (not_found_verdict(raw), None),
        }
    }

    fn submit(&self, raw: &str, ordinal: usize) -> Result<(SubmissionSource, ValidationVerdict, Option<f64>), EpisodeError> {
        let sandbox = self.sandbox();
        let path = resolve_submission_path(&sandbox, raw);
        let inside = match (path.canonicalize(), sandbox.canonicalize()) {
            (Ok(p), Ok(root)) => Some(p.starts_with(root)),
            _ => None,
        };
        let (source, bytes) = match inside {
            Some(false) => (SubmissionSource::OutsideSandbox, None),
            None => (SubmissionSource::NotFound, None),
            Some(true) => match fs::read(&path) {
                Err(_) => (SubmissionSource::NotFound, None),
                Ok(bytes) => {
                    let file = format!("{SUBMISSIONS_DIR}/{ordinal}.csv");
                    write_file(&self.dir.join(&file), &bytes)?;
                    (SubmissionSource::Archived { file, sha256: sha256_hex(&bytes) }, Some(bytes))
                }
            },
        };
        let (verdict, score) = self.judge_source(&source, raw, bytes.as_deref());
        Ok((source, verdict, score))
    }

    /// Run the turn loop until the budget, two idle turns, `max_turns`, an
    /// agent failure or a dead sandbox ends it.
    pub fn run(&self, agent: &mut dyn Agent, mut executor: Option<&mut dyn CodeExecutor>) -> Result<RunResult, EpisodeError> {
        let config = &self.meta.config;
        let transcript_path = self.dir.join(TRANSCRIPT_FILE);
        let mut transcript: File =
            OpenOptions::new().create(true).write(true).truncate(true).open(&transcript_path).map_err(io_err(&transcript_path))?;
        let tools = tool_specs();
        let mut conversation = Conversation::new(&self.meta.initial_prompt);
        let mut account = TokenAccount::new(config.token_budget);
        let mut turns: Vec<Turn> = Vec::new();
        let mut submissions: Vec<SubmissionRecord> = Vec::new();
        let mut idle = 0;
        let sandbox = self.sandbox();

        let termination = loop {
            if account.exhausted() {
                break Termination::Budget;
            }
            if config.max_turns.is_some_and(|m| turns.len() >= m) {
                break Termination::MaxTurns;
            }
            let mut reply = match respond_with_retry(agent, &conversation, &tools, &config.retry) {
                Ok(r) => r,
                Err(e) => break Termination::AgentError { message: e.to_string() },
            };
            let ordinal = turns.len() + 1;
            for (k, call) in reply.tool_calls.iter_mut().enumerate() {
                if call.id.is_empty() {
                    call.id = format!("call_{ordinal}_{}", k + 1);
                }
            }
            let assistant = Message::assistant(reply.content.clone(), reply.tool_calls.clone());
            let usage = reply.usage.unwrap_or_else(|| TokenUsage {
                input: estimate_conversation(&conversation),
                output: estimate_message(&assistant),
                estimated: true,
            });
            account.account(usage);
            conversation.push(assistant);

            let mut responses = Vec::new();
            let mut dead = None;
            for (k, call) in reply.tool_calls.iter().enumerate() {
                let mut rec = ToolResponseRecord {
                    call_id: call.id.clone(),
                    name: call.name.clone(),
                    content: String::new(),
                    exec: None,
                    wrote_submission: None,
                    submission: None,
                    source: None,
                };
                if let Some(m) = config.agent.max_tool_calls().filter(|&m| k >= m) {
                    rec.content = format!("Skipped: at most {m} tool calls are executed per reply.");
                } else if dead.is_some() {
                    rec.content = "Skipped: the code session is no longer available.".into();
                } else if call.name == SUBMIT_TOOL {
                    let raw = call.arg("path").unwrap_or("").to_string();
                    let n = submissions.len() + 1;
                    let (source, verdict, score) = self.submit(&raw, n)?;
                    rec.content = submission_response(n, &raw, &verdict, score, self.meta.baselines.p_dirty);
                    rec.submission = Some(n);
                    rec.source = Some(source.clone());
                    submissions.push(SubmissionRecord {
                        ordinal: n,
                        path: raw,
                        source,
                        verdict,
                        score,
                        turn: ordinal,
                        cumulative_tokens: account.total,
                    });
                } else if call.name == EXECUTE_CODE_TOOL {
                    match (call.arg("code"), executor.as_deref_mut()) {
                        (None, _) => rec.content = "Error: missing `code` argument.".into(),
                        (Some(_), None) => rec.content = "Code execution is not available in this episode.".into(),
                        (Some(code), Some(exec)) => {
                            let before = snapshot_submissions(&sandbox);
                            match exec.execute(code) {
                                Ok(r) => {
                                    rec.content = r.render();
                                    rec.exec = Some(r);
                                }
                                Err(e) => {
                                    rec.content = format!("Code session failed: {e}");
                                    dead = Some(e.to_string());
                                }
                            }
                            rec.wrote_submission = Some(wrote_submission(&before, &snapshot_submissions(&sandbox)));
                        }
                    }
                } else {
                    rec.content = format!("Error: unknown tool `{}`.", call.name);
                }
                conversation.push(Message::tool(call, rec.content.clone()));
                responses.push(rec);
            }

            let turn = Turn {
                ordinal,
                output: reply.content.clone(),
                tool_calls: reply.tool_calls.clone(),
                tool_responses: responses,
                usage,
                cumulative_tokens: account.total,
            };
            let mut line = serde_json::to_vec(&turn).expect("serializable");
            line.push(b'\n');
            transcript.write_all(&line).map_err(io_err(&transcript_path))?;
            turns.push(turn);

            if let Some(message) = dead {
                break Termination::SessionDead { message };
            }
            if reply.is_idle() {
                idle += 1;
                if idle >= 2 {
                    break Termination::Idle;
                }
            } else {
                idle = 0;
            }
        };
        transcript.flush().map_err(io_err(&transcript_path))?;

        let mut meta = self.meta.clone();
        meta.termination = Some(termination.clone());
        write_json(&self.dir.join(META_FILE), &meta)?;
        let result = assemble_result(&meta, &turns, submissions, termination);
        write_file(&self.dir.join(RESULT_FILE), &result_bytes(&result))?;
        Ok(result)
    }
}

/// Bytes of `result.json` for `result`, as written by [`Episode::run`].
pub fn result_bytes(result: &RunResult) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(result).expect("serializable");
    bytes.push(b'\n');
    bytes
}
