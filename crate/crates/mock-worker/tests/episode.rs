use std::path::Path;
use std::time::Duration;

use scrub_core::agent::replay::replay_matches;
use scrub_core::agent::scripted::SequenceAgent;
use scrub_core::agent::{AgentReply, AgentSpec, Episode, RunConfig, Termination, ToolCall};
use scrub_core::gate::Outcome;
use scrub_core::pipeline::PipelineConfig;
use scrub_core::provision::DatasetsFile;
use scrub_core::sandbox::{Session, SessionLimits, WorkerCommand};

fn stage(dir: &Path) -> Episode {
    let (b, recipe) = DatasetsFile::default().build("synthetic-default", Some(7)).unwrap();
    let (b, log) = b.corrupt(&recipe).unwrap();
    let cfg = RunConfig::new("synthetic-default", AgentSpec::Scripted { policy: "sequence".into() });
    Episode::prepare(dir, "run", &cfg, &b, &recipe, Some(&log), &PipelineConfig::default()).unwrap()
}

fn session(root: &Path) -> Session {
    let limits = SessionLimits { exec_timeout: Duration::from_secs(5), ..SessionLimits::default() };
    Session::start(WorkerCommand::new(env!("CARGO_BIN_EXE_scrub-mock-worker")), root, limits).unwrap()
}

fn code(id: usize, src: &str) -> AgentReply {
    AgentReply::calls("", vec![ToolCall::execute_code(format!("c{id}"), src)])
}

#[test]
fn code_written_submission_scores_like_direct_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let ep = stage(dir.path());
    let mut worker = session(&ep.sandbox());
    let mut agent = SequenceAgent::new([
        code(1, "copy('train.csv', 'train_cleaned_v1.csv')"),
        AgentReply::calls("", vec![ToolCall::submit("s1", "train_cleaned_v1.csv")]),
    ]);
    let r = ep.run(&mut agent, Some(&mut worker)).unwrap();
    let direct = ep.evaluator().evaluate_path(&ep.sandbox().join("train_cleaned_v1.csv")).unwrap();
    assert_eq!(r.submissions.len(), 1);
    assert_eq!(r.submissions[0].verdict.outcome, Outcome::Accepted);
    assert_eq!(r.submissions[0].score, Some(direct.f1));
    assert_eq!(r.best_score, direct.f1);
    assert_eq!((r.code_calls, r.submission_code_calls), (1, 1));
    worker.shutdown();
    assert!(replay_matches(dir.path()).unwrap());
}

/// Twenty code calls, each labelled by hand: does it create or change a
/// `train_cleaned_v*.csv` file in the sandbox?
const FIXTURE: [(&str, bool); 20] = [
    ("print('look')", false),
    ("x = 5", false),
    ("copy('train.csv', 'train_cleaned_v1.csv')", true),
    ("print(x)", false),
    ("copy('train.csv', 'train_cleaned_v1.csv')", false),
    ("write('train_cleaned_v1.csv', 'a')", true),
    ("write('notes.txt', 'hello')", false),
    ("write('train_cleaned_v2.csv', 'b')", true),
    ("raise ValueError('bad')", false),
    ("copy('train.csv', 'train_cleaned_v2.csv')", true),
    ("write('train_cleaned.csv', 'c')", false),
    ("1/0", false),
    ("write('train_cleaned_v3.csv', 'x' * 3)", true),
    ("copy('train_cleaned_v3.csv', 'backup.csv')", false),
    ("write('train_cleaned_v3.csv', 'xxx')", false),
    ("print('done')", false),
    ("write('train_cleaned_v10.csv', 'z')", true),
    ("eprint('warn')", false),
    ("copy('train_cleaned_v10.csv', 'train_cleaned_v11.csv')", true),
    ("y = x", false),
];

#[test]
fn submission_related_calls_match_hand_labels() {
    let dir = tempfile::tempdir().unwrap();
    let ep = stage(dir.path());
    let mut worker = session(&ep.sandbox());
    let mut agent = SequenceAgent::new(FIXTURE.iter().enumerate().map(|(i, (src, _))| code(i, src)));
    let r = ep.run(&mut agent, Some(&mut worker)).unwrap();
    let turns = scrub_core::agent::replay::read_transcript(&dir.path().join("transcript.jsonl")).unwrap();
    let detected: Vec<bool> = turns.iter().flat_map(|t| &t.tool_responses).map(|resp| resp.wrote_submission.unwrap()).collect();
    let labels: Vec<bool> = FIXTURE.iter().map(|(_, l)| *l).collect();
    assert_eq!(detected, labels);
    assert_eq!(r.code_calls, 20);
    assert_eq!(r.submission_code_calls, 7);
    assert_eq!(scrub_core::report::tool_mix(&r).percent, 35.0);
    assert_eq!(r.termination, Termination::Idle);
}

#[test]
fn dead_worker_ends_the_episode() {
    let dir = tempfile::tempdir().unwrap();
    let ep = stage(dir.path());
    let mut worker = session(&ep.sandbox());
    worker.shutdown();
    let mut agent = SequenceAgent::new([code(1, "print(1)"), code(2, "print(2)")]);
    let r = ep.run(&mut agent, Some(&mut worker)).unwrap();
    assert!(matches!(r.termination, Termination::SessionDead { .. }), "{:?}", r.termination);
    assert_eq!(r.turns, 1);
}
