//! `scrub`: corrupt datasets, measure baselines, run cleaning episodes,
//! replay them and aggregate the results.
//!
//! Exit codes: 0 on success, 1 when the input is invalid (bad arguments,
//! config, unknown dataset, a replay that does not reproduce), 2 when
//! something fails at run time (I/O, downloads, the code worker).

pub mod config;
pub mod grid;

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use scrub_core::agent::episode::{result_bytes, RESULT_FILE};
use scrub_core::agent::replay::{replay, ReplayError};
use scrub_core::agent::{AgentSpec, EpisodeError, HintLevel, RunConfig};
use scrub_core::corrupt::CorruptionRecipe;
use scrub_core::csv_io::save_csv;
use scrub_core::pipeline::{compute_baselines, PipelineError};
use scrub_core::provision::{DatasetBundle, ProvisionError};
use scrub_core::report::{load_runs, summarize, write_report, DEFAULT_THRESHOLDS};
use scrub_core::sandbox::WorkerCommand;

pub use config::CliConfig;
use grid::{check_agent, plan, run_grid, Staged};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }

    fn from_provision(e: ProvisionError) -> Self {
        match e {
            ProvisionError::DownloadFailed { .. } | ProvisionError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }

    fn from_pipeline(e: PipelineError) -> Self {
        CliError::Invalid(e.to_string())
    }

    pub(crate) fn from_episode(e: EpisodeError) -> Self {
        match e {
            EpisodeError::AlreadyExists(_) | EpisodeError::InvalidConfig(_) | EpisodeError::NoDirtyTable => CliError::Invalid(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }

    fn from_replay(e: ReplayError) -> Self {
        match e {
            ReplayError::Episode(e) => Self::from_episode(e),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

#[derive(Debug, Parser)]
#[command(name = "scrub", version, about = "Benchmark harness for agents that clean tabular training data")]
pub struct Cli {
    /// TOML or JSON file with [datasets], [pipeline], [run] and [report] sections.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for the train/test split, synthetic generation and corruption.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrupt a dataset; writes the clean and dirty tables and the ground-truth log.
    Corrupt(CorruptArgs),
    /// Score the clean and the dirty training tables (P_Clean, P_Dirty).
    Baseline(BaselineArgs),
    /// Run cleaning episodes: every hint level times every repeat.
    Run(RunArgs),
    /// Re-judge an episode's archived submissions and compare with result.json.
    Replay(ReplayArgs),
    /// Aggregate finished episodes into summary tables and curves.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    #[arg(long, default_value = "synthetic-default")]
    pub dataset: String,
    /// Recipe file replacing the dataset's own recipe.
    #[arg(long, value_name = "FILE")]
    pub recipe: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value = "corrupted")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Also write the report here.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub dataset: Option<String>,
    /// `noop`, `oracle`, `budget` (scripted) or `llm:<model>`.
    #[arg(long)]
    pub agent: Option<String>,
    /// Chat-completions endpoint for llm agents.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// `none`, `weak`, `strong` or `all`.
    #[arg(long)]
    pub hint: Option<String>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub budget: Option<u64>,
    #[arg(long)]
    pub max_turns: Option<usize>,
    #[arg(long)]
    pub goal: Option<f64>,
    /// Code worker program; it receives the sandbox root as its last argument.
    #[arg(long)]
    pub worker: Option<String>,
    #[arg(long = "worker-arg", allow_hyphen_values = true)]
    pub worker_args: Vec<String>,
    /// Episodes run at the same time.
    #[arg(long, default_value_t = 4)]
    pub jobs: usize,
    #[arg(long, default_value = "episodes")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Episode directory (holds episode.json and transcript.jsonl).
    pub episode: PathBuf,
    /// Print the replayed result.
    #[arg(long)]
    pub print: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, default_value = "episodes")]
    pub episodes: PathBuf,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
    /// Comma-separated cumulative-token thresholds for the curves.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<u64>>,
}

/// Parse `argv` (program name first), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = CliConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Corrupt(a) => corrupt(&config, cli.seed, a),
        Command::Baseline(a) => baseline(&config, cli.seed, a),
        Command::Run(a) => run_episodes(&config, cli.seed, a),
        Command::Replay(a) => replay_episode(a),
        Command::Report(a) => report(&config, a),
    }
}

fn build(config: &CliConfig, seed: Option<u64>, data: &DatasetArgs) -> Result<(DatasetBundle, CorruptionRecipe), CliError> {
    let (bundle, mut recipe) = config.datasets.build(&data.dataset, seed).map_err(CliError::from_provision)?;
    if let Some(path) = &data.recipe {
        recipe = CorruptionRecipe::load(path).map_err(|e| CliError::Invalid(e.to_string()))?;
        if let Some(s) = seed {
            recipe.master_seed = s;
        }
    }
    Ok((bundle, recipe))
}

fn corrupt(config: &CliConfig, seed: Option<u64>, args: &CorruptArgs) -> Result<(), CliError> {
    let (bundle, recipe) = build(config, seed, &args.data)?;
    let (bundle, log) = bundle.corrupt(&recipe).map_err(|e| CliError::Invalid(e.to_string()))?;
    create_dir(&args.out)?;
    let save = |t, name: &str| save_csv(t, args.out.join(name)).map_err(|e| CliError::Runtime(e.to_string()));
    save(&bundle.train_clean, "train_clean.csv")?;
    save(&bundle.test_clean, "test_clean.csv")?;
    save(bundle.train_dirty.as_ref().expect("just corrupted"), "train_dirty.csv")?;
    write_file(&args.out.join("ground_truth_log.csv"), &log.to_csv_bytes())?;
    write_file(&args.out.join("recipe.toml"), recipe.to_toml().as_bytes())?;
    println!("{}: {} cells changed by {} steps, written to {}", args.data.dataset, log.len(), recipe.steps.len(), args.out.display());
    Ok(())
}

fn baseline(config: &CliConfig, seed: Option<u64>, args: &BaselineArgs) -> Result<(), CliError> {
    let (bundle, recipe) = build(config, seed, &args.data)?;
    let (bundle, _) = bundle.corrupt(&recipe).map_err(|e| CliError::Invalid(e.to_string()))?;
    let report = compute_baselines(&bundle, &config.pipeline).map_err(CliError::from_pipeline)?;
    let mut json = serde_json::to_string_pretty(&report).expect("serializable");
    json.push('\n');
    print!("{json}");
    if let Some(out) = &args.out {
        write_file(out, json.as_bytes())?;
    }
    Ok(())
}

fn parse_agent(raw: &str, endpoint: Option<&str>) -> AgentSpec {
    match raw.split_once(':') {
        Some(("llm", model)) => AgentSpec::Llm {
            endpoint: endpoint.unwrap_or("").to_string(),
            model: model.to_string(),
            temperature: None,
            max_tool_rounds: 8,
        },
        Some(("scripted", policy)) => AgentSpec::Scripted { policy: policy.to_string() },
        _ => AgentSpec::Scripted { policy: raw.to_string() },
    }
}

fn parse_hints(raw: &str) -> Result<Vec<HintLevel>, CliError> {
    if raw == "all" {
        return Ok(HintLevel::ALL.to_vec());
    }
    raw.split(',').map(|h| h.trim().parse::<HintLevel>().map_err(CliError::Invalid)).collect()
}

/// Merge `[run]` from the config file with the command-line flags; flags win.
fn run_config(config: &CliConfig, seed: Option<u64>, a: &RunArgs) -> Result<(RunConfig, Vec<HintLevel>), CliError> {
    let agent = match (&a.agent, &config.run) {
        (Some(raw), _) => parse_agent(raw, a.endpoint.as_deref()),
        (None, Some(run)) => run.agent.clone(),
        (None, None) => return Err(CliError::Invalid("no agent given: pass --agent or set run.agent".into())),
    };
    let mut rc = config.run.clone().unwrap_or_else(|| RunConfig::new("synthetic-default", agent.clone()));
    rc.agent = agent;
    if let (Some(e), AgentSpec::Llm { endpoint, .. }) = (&a.endpoint, &mut rc.agent) {
        *endpoint = e.clone();
    }
    if let Some(d) = &a.dataset {
        rc.dataset = d.clone();
    }
    let hints = match &a.hint {
        Some(h) => parse_hints(h)?,
        None => vec![rc.hint_level],
    };
    rc.repeats = a.repeats.unwrap_or(rc.repeats);
    rc.token_budget = a.budget.unwrap_or(rc.token_budget);
    rc.max_turns = a.max_turns.or(rc.max_turns);
    rc.goal_f1 = a.goal.or(rc.goal_f1);
    rc.seed = seed.or(rc.seed);
    if let Some(program) = &a.worker {
        rc.worker = Some(WorkerCommand { program: program.clone(), args: a.worker_args.clone() });
    }
    check_agent(&rc)?;
    Ok((rc, hints))
}

fn run_episodes(config: &CliConfig, seed: Option<u64>, a: &RunArgs) -> Result<(), CliError> {
    let (rc, hints) = run_config(config, seed, a)?;
    let data = DatasetArgs { dataset: rc.dataset.clone(), recipe: None };
    let (bundle, mut recipe) = build(config, rc.seed, &data)?;
    if let Some(id) = &rc.recipe {
        recipe = scrub_core::provision::recipe_for(id).map_err(CliError::from_provision)?;
        if let Some(s) = rc.seed {
            recipe.master_seed = s;
        }
    }
    let (bundle, log) = bundle.corrupt(&recipe).map_err(|e| CliError::Invalid(e.to_string()))?;
    let staged = Staged { bundle, recipe, log, pipeline: config.pipeline.clone() };
    create_dir(&a.out)?;
    let jobs = plan(&rc, &hints);
    let results = run_grid(&jobs, &staged, &a.out, a.jobs);
    let mut worst: Option<CliError> = None;
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(r) => println!(
                "{}  best {:.4}  improvement {:+.4}  submissions {}  tokens {}  ended: {}",
                job.run_id,
                r.best_score,
                r.improvement,
                r.submissions.len(),
                r.total_tokens,
                serde_json::to_value(&r.termination).expect("serializable")["reason"].as_str().unwrap_or("?"),
            ),
            Err(e) => {
                eprintln!("{}  failed: {e}", job.run_id);
                if worst.as_ref().is_none_or(|w| e.code() > w.code()) {
                    worst = Some(e);
                }
            }
        }
    }
    worst.map_or(Ok(()), Err)
}

fn replay_episode(a: &ReplayArgs) -> Result<(), CliError> {
    let result = replay(&a.episode).map_err(CliError::from_replay)?;
    let bytes = result_bytes(&result);
    if a.print {
        print!("{}", String::from_utf8_lossy(&bytes));
    }
    let recorded_path = a.episode.join(RESULT_FILE);
    let recorded = fs::read(&recorded_path).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", recorded_path.display())))?;
    if recorded != bytes {
        return Err(CliError::Invalid(format!("replay of {} does not reproduce {}", a.episode.display(), RESULT_FILE)));
    }
    println!("{}: replay reproduces {} ({} submissions)", a.episode.display(), RESULT_FILE, result.submissions.len());
    Ok(())
}

fn report(config: &CliConfig, a: &ReportArgs) -> Result<(), CliError> {
    let thresholds = a.thresholds.clone().or_else(|| config.report.thresholds.clone()).unwrap_or_else(|| DEFAULT_THRESHOLDS.to_vec());
    let runs = load_runs(&a.episodes).map_err(|e| CliError::Invalid(e.to_string()))?;
    if runs.is_empty() {
        return Err(CliError::Invalid(format!("no finished episodes under {}", a.episodes.display())));
    }
    create_dir(&a.out)?;
    write_report(&runs, &thresholds, &a.out).map_err(|e| CliError::Runtime(e.to_string()))?;
    let summary = summarize(&runs, &thresholds).map_err(|e| CliError::Invalid(e.to_string()))?;
    println!("{:<24} {:<22} {:<7} {:>5} {:>9} {:>9} {:>9}", "dataset", "agent", "hint", "runs", "mean_pp", "min_pp", "max_pp");
    for g in &summary.groups {
        println!(
            "{:<24} {:<22} {:<7} {:>5} {:>9.3} {:>9.3} {:>9.3}",
            g.dataset,
            g.agent,
            g.hint_level.to_string(),
            g.runs.len(),
            g.mean_improvement,
            g.min_improvement,
            g.max_improvement
        );
    }
    println!("{} runs summarized into {}", runs.len(), a.out.display());
    Ok(())
}
