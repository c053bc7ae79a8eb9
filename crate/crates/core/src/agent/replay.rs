use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::episode::{result_bytes, Episode, EpisodeError, EpisodeMeta, SubmissionSource, Turn, META_FILE, RESULT_FILE, TRANSCRIPT_FILE};
use super::{assemble_result, RunResult, SubmissionRecord, SUBMIT_TOOL};
use crate::provision::sha256_hex;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error("transcript corrupt at line {line}: {reason}")]
    TranscriptCorrupt { line: usize, reason: String },
    #[error("submission artifact `{0}` is missing")]
    MissingArtifacts(PathBuf),
    #[error("submission artifact `{0}` no longer matches its recorded checksum")]
    ArtifactChanged(PathBuf),
    #[error("episode in `{0}` never finished")]
    NotFinished(PathBuf),
}

pub fn read_transcript(path: &Path) -> Result<Vec<Turn>, ReplayError> {
    let text = fs::read_to_string(path).map_err(|source| EpisodeError::Io { path: path.to_path_buf(), source })?;
    let mut turns = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let turn: Turn =
            serde_json::from_str(line).map_err(|e| ReplayError::TranscriptCorrupt { line: i + 1, reason: e.to_string() })?;
        if turn.ordinal != turns.len() + 1 || turn.tool_calls.len() != turn.tool_responses.len() {
            return Err(ReplayError::TranscriptCorrupt { line: i + 1, reason: "turn ordinal or tool response count out of step".into() });
        }
        turns.push(turn);
    }
    Ok(turns)
}

/// Re-run the gate and the evaluator on every archived submission of a
/// finished episode and rebuild its result. The agent is never contacted.
pub fn replay(dir: &Path) -> Result<RunResult, ReplayError> {
    let episode = Episode::open(dir)?;
    let meta: &EpisodeMeta = episode.meta();
    let termination = meta.termination.clone().ok_or_else(|| ReplayError::NotFinished(dir.join(META_FILE)))?;
    let turns = read_transcript(&dir.join(TRANSCRIPT_FILE))?;

    let mut submissions = Vec::new();
    for turn in &turns {
        for (call, resp) in turn.tool_calls.iter().zip(&turn.tool_responses) {
            let Some(ordinal) = resp.submission else { continue };
            if call.name != SUBMIT_TOOL || ordinal != submissions.len() + 1 {
                return Err(ReplayError::TranscriptCorrupt { line: turn.ordinal, reason: format!("unexpected submission {ordinal}") });
            }
            let source = resp.source.clone().ok_or_else(|| ReplayError::TranscriptCorrupt {
                line: turn.ordinal,
                reason: format!("submission {ordinal} has no recorded source"),
            })?;
            let raw = call.arg("path").unwrap_or("").to_string();
            let bytes = match &source {
                SubmissionSource::Archived { file, sha256 } => {
                    let path = dir.join(file);
                    let bytes = fs::read(&path).map_err(|_| ReplayError::MissingArtifacts(path.clone()))?;
                    if &sha256_hex(&bytes) != sha256 {
                        return Err(ReplayError::ArtifactChanged(path));
                    }
                    Some(bytes)
                }
                _ => None,
            };
            let (verdict, score) = episode.judge_source(&source, &raw, bytes.as_deref());
            submissions.push(SubmissionRecord {
                ordinal,
                path: raw,
                source,
                verdict,
                score,
                turn: turn.ordinal,
                cumulative_tokens: turn.cumulative_tokens,
            });
        }
    }
    Ok(assemble_result(meta, &turns, submissions, termination))
}

/// Read `result.json` and replay the episode; true when they agree byte for
/// byte.
pub fn replay_matches(dir: &Path) -> Result<bool, ReplayError> {
    let path = dir.join(RESULT_FILE);
    let recorded = fs::read(&path).map_err(|_| ReplayError::MissingArtifacts(path.clone()))?;
    Ok(result_bytes(&replay(dir)?) == recorded)
}
