//! Aggregation of finished episodes into result tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::episode::RESULT_FILE;
use crate::agent::{HintLevel, RunResult};
use crate::gate::{tally_outcomes, FailureTable, Outcome};
use crate::pipeline::BaselineReport;

/// Cumulative-token thresholds of the default curve: 25k to 200k.
pub const DEFAULT_THRESHOLDS: [u64; 8] = [25_000, 50_000, 75_000, 100_000, 125_000, 150_000, 175_000, 200_000];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("run `{run_id}` was scored against different baselines")]
    LineageMismatch { run_id: String },
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
    #[error("i/o error on `{path}`: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("bad result file `{path}`: {reason}")]
    BadResult { path: PathBuf, reason: String },
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |e| ReportError::Io { path: path.to_path_buf(), reason: e.to_string() }
}

/// Improvement over P_Dirty in percentage points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub raw: f64,
    /// `raw` floored at zero: the dirty file itself is always available.
    pub floored: f64,
}

pub fn improvement(run: &RunResult, baselines: &BaselineReport) -> Result<Improvement, ReportError> {
    if run.baselines.p_dirty.to_bits() != baselines.p_dirty.to_bits() || run.baselines.p_clean.to_bits() != baselines.p_clean.to_bits() {
        return Err(ReportError::LineageMismatch { run_id: run.run_id.clone() });
    }
    let raw = 100.0 * (run.best_score - baselines.p_dirty);
    Ok(Improvement { raw, floored: raw.max(0.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tokens: u64,
    pub score: f64,
}

/// For each threshold, the best accepted score among submissions made with
/// at most that many cumulative tokens, never below P_Dirty.
pub fn best_at_thresholds(run: &RunResult, thresholds: &[u64]) -> Result<Vec<CurvePoint>, ReportError> {
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(ReportError::UnsortedThresholds);
    }
    Ok(thresholds
        .iter()
        .map(|&t| {
            let score = run
                .submissions
                .iter()
                .filter(|s| s.cumulative_tokens <= t)
                .filter_map(|s| s.score)
                .fold(run.baselines.p_dirty, f64::max);
            CurvePoint { tokens: t, score }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToolMix {
    pub code_calls: usize,
    pub submission_code_calls: usize,
    pub percent: f64,
    /// No code calls at all; `percent` is then 0.
    pub empty: bool,
}

pub fn tool_mix_counts(code_calls: usize, submission_code_calls: usize) -> ToolMix {
    let empty = code_calls == 0;
    let percent = if empty { 0.0 } else { (100 * submission_code_calls) as f64 / code_calls as f64 };
    ToolMix { code_calls, submission_code_calls, percent, empty }
}

pub fn tool_mix(run: &RunResult) -> ToolMix {
    tool_mix_counts(run.code_calls, run.submission_code_calls)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub dataset: String,
    pub agent: String,
    pub hint_level: HintLevel,
    pub runs: Vec<String>,
    pub mean_improvement: f64,
    pub min_improvement: f64,
    pub max_improvement: f64,
    pub mean_raw_improvement: f64,
    pub failures: FailureTable,
    pub tool_mix: ToolMix,
    /// Mean over runs of the best-at-threshold score.
    pub mean_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRow {
    pub agent: String,
    pub failures: FailureTable,
    pub tool_mix: ToolMix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub thresholds: Vec<u64>,
    pub groups: Vec<GroupSummary>,
    pub agents: Vec<AgentRow>,
}

/// Every `result.json` directly below `episodes_dir`, sorted by run id.
pub fn load_runs(episodes_dir: &Path) -> Result<Vec<RunResult>, ReportError> {
    let mut runs = Vec::new();
    for entry in fs::read_dir(episodes_dir).map_err(io(episodes_dir))? {
        let entry = entry.map_err(io(episodes_dir))?;
        let path = entry.path().join(RESULT_FILE);
        if !path.is_file() {
            continue;
        }
        let bytes = fs::read(&path).map_err(io(&path))?;
        let run: RunResult =
            serde_json::from_slice(&bytes).map_err(|e| ReportError::BadResult { path: path.clone(), reason: e.to_string() })?;
        runs.push(run);
    }
    runs.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(runs)
}

fn outcomes<'a>(runs: impl IntoIterator<Item = &'a RunResult>) -> Vec<Outcome> {
    runs.into_iter().flat_map(|r| r.submissions.iter().map(|s| s.verdict.outcome)).collect()
}

pub fn summarize(runs: &[RunResult], thresholds: &[u64]) -> Result<ExperimentSummary, ReportError> {
    let mut sorted: Vec<&RunResult> = runs.iter().collect();
    sorted.sort_by(|a, b| a.run_id.cmp(&b.run_id));

    let mut groups: BTreeMap<(String, String, HintLevel), Vec<&RunResult>> = BTreeMap::new();
    let mut by_agent: BTreeMap<String, Vec<&RunResult>> = BTreeMap::new();
    for r in &sorted {
        groups.entry((r.dataset.clone(), r.agent.clone(), r.hint_level)).or_default().push(r);
        by_agent.entry(r.agent.clone()).or_default().push(r);
    }

    let mut out = Vec::new();
    for ((dataset, agent, hint_level), members) in groups {
        let imps: Vec<Improvement> = members.iter().map(|r| improvement(r, &r.baselines)).collect::<Result<_, _>>()?;
        let n = imps.len() as f64;
        let floored: Vec<f64> = imps.iter().map(|i| i.floored).collect();
        let curves: Vec<Vec<CurvePoint>> = members.iter().map(|r| best_at_thresholds(r, thresholds)).collect::<Result<_, _>>()?;
        let mean_curve = thresholds
            .iter()
            .enumerate()
            .map(|(k, &t)| CurvePoint { tokens: t, score: curves.iter().map(|c| c[k].score).sum::<f64>() / n })
            .collect();
        out.push(GroupSummary {
            dataset,
            agent,
            hint_level,
            runs: members.iter().map(|r| r.run_id.clone()).collect(),
            mean_improvement: floored.iter().sum::<f64>() / n,
            min_improvement: floored.iter().copied().fold(f64::INFINITY, f64::min),
            max_improvement: floored.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_raw_improvement: imps.iter().map(|i| i.raw).sum::<f64>() / n,
            failures: tally_outcomes(&outcomes(members.iter().copied())),
            tool_mix: tool_mix_counts(
                members.iter().map(|r| r.code_calls).sum(),
                members.iter().map(|r| r.submission_code_calls).sum(),
            ),
            mean_curve,
        });
    }
    let agents = by_agent
        .into_iter()
        .map(|(agent, members)| AgentRow {
            failures: tally_outcomes(&outcomes(members.iter().copied())),
            tool_mix: tool_mix_counts(
                members.iter().map(|r| r.code_calls).sum(),
                members.iter().map(|r| r.submission_code_calls).sum(),
            ),
            agent,
        })
        .collect();
    Ok(ExperimentSummary { thresholds: thresholds.to_vec(), groups: out, agents })
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Write `summary.json`, `improvement.csv`, `failures.csv`, `toolmix.csv`
/// and `curves/<run-id>.csv` into `out_dir`. Returns the files written.
pub fn write_report(runs: &[RunResult], thresholds: &[u64], out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let summary = summarize(runs, thresholds)?;
    let curves_dir = out_dir.join("curves");
    fs::create_dir_all(&curves_dir).map_err(io(&curves_dir))?;
    let mut written = Vec::new();
    let mut put = |name: PathBuf, bytes: Vec<u8>| -> Result<(), ReportError> {
        fs::write(&name, bytes).map_err(io(&name))?;
        written.push(name);
        Ok(())
    };

    let mut json = serde_json::to_vec_pretty(&summary).expect("serializable");
    json.push(b'\n');
    put(out_dir.join("summary.json"), json)?;

    let rows = summary
        .groups
        .iter()
        .map(|g| {
            vec![
                g.dataset.clone(),
                g.agent.clone(),
                g.hint_level.to_string(),
                g.runs.len().to_string(),
                g.mean_improvement.to_string(),
                g.min_improvement.to_string(),
                g.max_improvement.to_string(),
                g.mean_raw_improvement.to_string(),
            ]
        })
        .collect();
    put(
        out_dir.join("improvement.csv"),
        csv_bytes(&["dataset", "agent", "hint_level", "runs", "mean", "min", "max", "mean_raw"], rows),
    )?;

    let rows = summary
        .agents
        .iter()
        .map(|a| {
            let f = &a.failures;
            vec![
                a.agent.clone(),
                f.submissions.to_string(),
                f.column_violation.to_string(),
                f.dataset_not_found.to_string(),
                f.other.to_string(),
                f.total.to_string(),
            ]
        })
        .collect();
    put(
        out_dir.join("failures.csv"),
        csv_bytes(&["agent", "submissions", "column_violation", "dataset_not_found", "other", "total"], rows),
    )?;

    let rows = summary
        .agents
        .iter()
        .map(|a| {
            let t = &a.tool_mix;
            vec![a.agent.clone(), t.code_calls.to_string(), t.submission_code_calls.to_string(), t.percent.to_string(), t.empty.to_string()]
        })
        .collect();
    put(out_dir.join("toolmix.csv"), csv_bytes(&["agent", "code_calls", "submission_code_calls", "percent", "empty"], rows))?;

    let mut sorted: Vec<&RunResult> = runs.iter().collect();
    sorted.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    for r in sorted {
        let rows = best_at_thresholds(r, thresholds)?.iter().map(|p| vec![p.tokens.to_string(), p.score.to_string()]).collect();
        put(curves_dir.join(format!("{}.csv", r.run_id)), csv_bytes(&["tokens", "best_score"], rows))?;
    }
    Ok(written)
}
