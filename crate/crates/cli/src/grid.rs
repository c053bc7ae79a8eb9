//! Runs the repeats x hint levels grid as independent concurrent episodes.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use scrub_core::agent::llm::ChatClient;
use scrub_core::agent::scripted::{noop_agent, BudgetAgent, OracleAgent, POLICIES};
use scrub_core::agent::{Agent, AgentSpec, CodeExecutor, Episode, HintLevel, RunConfig, RunResult};
use scrub_core::corrupt::{CorruptionRecipe, GroundTruthLog};
use scrub_core::pipeline::PipelineConfig;
use scrub_core::provision::DatasetBundle;
use scrub_core::sandbox::{Session, SessionLimits};

use crate::CliError;

/// Characters per turn emitted by the `budget` policy.
pub const BUDGET_POLICY_CHARS: usize = 2_000;

#[derive(Debug, Clone, PartialEq)]
pub struct GridJob {
    pub run_id: String,
    pub config: RunConfig,
}

/// One job per (hint level, repeat), in that order.
pub fn plan(base: &RunConfig, hints: &[HintLevel]) -> Vec<GridJob> {
    hints
        .iter()
        .flat_map(|&h| {
            (1..=base.repeats).map(move |r| {
                let config = RunConfig { hint_level: h, ..base.clone() };
                GridJob { run_id: config.run_id(r), config }
            })
        })
        .collect()
}

/// The corrupted dataset every job of a grid shares.
pub struct Staged {
    pub bundle: DatasetBundle,
    pub recipe: CorruptionRecipe,
    pub log: GroundTruthLog,
    pub pipeline: PipelineConfig,
}

/// Reject configs that could only fail once episodes are running.
pub fn check_agent(config: &RunConfig) -> Result<(), CliError> {
    config.validate().map_err(CliError::Invalid)?;
    match &config.agent {
        AgentSpec::Scripted { policy } if !POLICIES.contains(&policy.as_str()) => {
            Err(CliError::Invalid(format!("unknown scripted policy `{policy}` (known: {})", POLICIES.join(", "))))
        }
        AgentSpec::Llm { .. } if config.worker.is_none() => {
            Err(CliError::Invalid("llm agents need a code worker: pass --worker or set run.worker".into()))
        }
        _ => Ok(()),
    }
}

fn make_agent(config: &RunConfig, episode: &Episode, staged: &Staged) -> Box<dyn Agent> {
    match &config.agent {
        AgentSpec::Scripted { policy } => match policy.as_str() {
            "oracle" => Box::new(OracleAgent::new(episode.sandbox(), staged.log.clone(), staged.bundle.train_clean.schema())),
            "budget" => Box::new(BudgetAgent::new(BUDGET_POLICY_CHARS)),
            _ => Box::new(noop_agent()),
        },
        AgentSpec::Llm { endpoint, model, temperature, .. } => {
            Box::new(ChatClient::from_env(endpoint, model).with_temperature(*temperature))
        }
    }
}

fn run_job(job: &GridJob, staged: &Staged, out_dir: &Path) -> Result<RunResult, CliError> {
    let dir = out_dir.join(&job.run_id);
    let episode = Episode::prepare(&dir, &job.run_id, &job.config, &staged.bundle, &staged.recipe, Some(&staged.log), &staged.pipeline)
        .map_err(CliError::from_episode)?;
    let mut agent = make_agent(&job.config, &episode, staged);
    let mut session = match &job.config.worker {
        Some(cmd) => {
            let limits = SessionLimits {
                exec_timeout: Duration::from_secs(job.config.exec_timeout_secs),
                output_limit: job.config.output_limit,
                ..SessionLimits::default()
            };
            Some(Session::start(cmd.clone(), episode.sandbox(), limits).map_err(|e| CliError::Runtime(e.to_string()))?)
        }
        None => None,
    };
    let executor = session.as_mut().map(|s| s as &mut dyn CodeExecutor);
    let result = episode.run(agent.as_mut(), executor).map_err(CliError::from_episode);
    if let Some(s) = session.as_mut() {
        s.shutdown();
    }
    result
}

/// Run every job with at most `parallel` episodes at a time. Results come
/// back in job order whatever order the episodes finish in.
pub fn run_grid(jobs: &[GridJob], staged: &Staged, out_dir: &Path, parallel: usize) -> Vec<Result<RunResult, CliError>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunResult, CliError>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    thread::scope(|scope| {
        for _ in 0..parallel.clamp(1, jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let r = run_job(job, staged, out_dir);
                *slots[i].lock().expect("no panics while holding the slot") = Some(r);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().expect("not poisoned").expect("every job ran")).collect()
}
