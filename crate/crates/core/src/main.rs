use std::collections::BTreeMap;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use convsql::config::{ConfigError, PolicyConfig, RunConfig};
use convsql::db::{DatabaseRegistry, ExecLimits};
use convsql::episode::{validate_with, Trajectory, Violation};
use convsql::eval::{evaluate, render_table, Prediction};
use convsql::fixtures::{case_pack, materialize, recorded_cases};
use convsql::pipeline::{
    curriculum_bins, export_sft, run_collection, Journal, StoreEntry, SuccessProfile,
};
use convsql::reward::{score_trajectory, GoldReference, RewardBreakdown};
use convsql::service::{serve, Environment};
use convsql::task::{load_tasks, read_jsonl, write_jsonl, DialogueTask, JsonlError};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "convsql",
    version,
    about = "Multi-turn text-to-SQL environment, rewards and data pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score predictions against a task file by EM and EX.
    Eval {
        #[arg(long)]
        registry: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run collection rounds into the journal, resuming finished rounds.
    Collect {
        #[arg(long)]
        config: PathBuf,
        /// Stop after this many rounds instead of the configured count.
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Bin success profiles into train_rl{k}.jsonl files.
    Curriculum {
        #[arg(long)]
        profiles: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = convsql::pipeline::DEFAULT_BIN_SIZE)]
        bin_size: usize,
    },
    /// Turn a trajectory store into SFT records.
    ExportSft {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute reward breakdowns for recorded trajectories.
    Score {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 1 if any trajectory breaks the action grammar.
        #[arg(long)]
        check: bool,
    },
    /// Serve the reset/step protocol over TCP.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured listen address.
        #[arg(long)]
        addr: Option<String>,
    },
    /// Write bundled databases, recorded cases and a config into a directory.
    InitFixtures {
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn config_failure(e: ConfigError) -> Failure {
    match e {
        ConfigError::Invalid(_) | ConfigError::Read { .. } => Failure::Validation(e.into()),
        ConfigError::Load(_) => Failure::Runtime(e.into()),
    }
}

fn jsonl_failure(e: JsonlError) -> Failure {
    match e {
        JsonlError::Json { .. } => Failure::Validation(e.into()),
        JsonlError::Io { .. } => Failure::Runtime(e.into()),
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    RunConfig::load(path).map_err(config_failure)
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn cmd_eval(
    registry: &Path,
    dataset: &Path,
    predictions: &Path,
    json: Option<&Path>,
) -> Result<(), Failure> {
    let registry = DatabaseRegistry::load(registry).context("loading registry")?;
    let tasks = load_tasks(dataset).map_err(jsonl_failure)?;
    let preds: Vec<Prediction> = read_jsonl(predictions).map_err(jsonl_failure)?;
    let report = evaluate(&tasks, &preds, &registry, ExecLimits::default())
        .map_err(|e| Failure::Validation(e.into()))?;
    print!("{}", render_table(&report));
    if let Some(path) = json {
        std::fs::write(path, to_json(&report))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_collect(config: &Path, rounds: Option<usize>) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(r) = rounds {
        cfg.pipeline.rounds = r;
    }
    let registry = cfg.registry().map_err(config_failure)?;
    let tasks = cfg.load_tasks().map_err(config_failure)?;
    let policy = cfg.policy().map_err(config_failure)?;
    let journal = Journal::new(&cfg.journal);
    let report = run_collection(
        tasks,
        policy.as_ref(),
        &registry,
        &cfg.rewards,
        &cfg.pipeline,
        &journal,
    )
    .map_err(|e| Failure::Runtime(e.into()))?;
    println!(
        "{:>5} {:>6} {:>9} {:>6} {:>5} {:>7} {:>8} {:>8}",
        "round", "pool", "attempted", "valid", "kept", "solved", "skipped", "covered"
    );
    for s in &report.rounds {
        println!(
            "{:>5} {:>6} {:>9} {:>6} {:>5} {:>7} {:>8} {:>8}",
            s.round,
            s.pool_size,
            s.attempted,
            s.valid,
            s.kept,
            s.solved,
            s.skipped,
            s.covered_total
        );
    }
    write_jsonl(&journal.root().join("profiles.jsonl"), &report.profiles).map_err(jsonl_failure)?;
    println!("journal: {}", journal.root().display());
    Ok(())
}

fn cmd_curriculum(
    profiles: &Path,
    tasks: &Path,
    out: &Path,
    bin_size: usize,
) -> Result<(), Failure> {
    if bin_size == 0 {
        return Err(Failure::Validation(anyhow!("bin size must be positive")));
    }
    let profiles: Vec<SuccessProfile> = read_jsonl(profiles).map_err(jsonl_failure)?;
    let tasks: BTreeMap<String, DialogueTask> = load_tasks(tasks)
        .map_err(jsonl_failure)?
        .into_iter()
        .map(|t| (t.id(), t))
        .collect();
    if let Some(p) = profiles.iter().find(|p| !tasks.contains_key(&p.task_id)) {
        return Err(Failure::Validation(anyhow!(
            "profile for unknown task {}",
            p.task_id
        )));
    }
    let bins = curriculum_bins(&profiles, bin_size);
    let files = convsql::pipeline::write_curriculum(out, &bins, &tasks).map_err(jsonl_failure)?;
    for (f, b) in files.iter().zip(&bins) {
        println!("{} {}", f.display(), b.len());
    }
    Ok(())
}

fn cmd_export(store: &Path, out: &Path) -> Result<(), Failure> {
    let store: Vec<StoreEntry> = read_jsonl(store).map_err(jsonl_failure)?;
    let records = export_sft(&store);
    write_jsonl(out, &records).map_err(jsonl_failure)?;
    println!("{} records -> {}", records.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct ScoreRecord {
    trajectory_id: String,
    task_id: String,
    reward: RewardBreakdown,
    violations: Vec<Violation>,
}

fn cmd_score(
    config: &Path,
    trajectories: &Path,
    out: Option<&Path>,
    check: bool,
) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let registry = cfg.registry().map_err(config_failure)?;
    let tasks: BTreeMap<String, DialogueTask> = cfg
        .load_tasks()
        .map_err(config_failure)?
        .into_iter()
        .map(|t| (t.id(), t))
        .collect();
    let trajs: Vec<Trajectory> = read_jsonl(trajectories).map_err(jsonl_failure)?;
    let mut golds: BTreeMap<String, GoldReference> = BTreeMap::new();
    let mut records = Vec::with_capacity(trajs.len());
    for t in &trajs {
        let task = tasks.get(&t.task_id).ok_or_else(|| {
            Failure::Validation(anyhow!(
                "trajectory {} names unknown task {}",
                t.id,
                t.task_id
            ))
        })?;
        if !golds.contains_key(&t.task_id) {
            let g = GoldReference::compute(task, &registry, cfg.episode.exec)
                .context("executing gold SQL")?;
            golds.insert(t.task_id.clone(), g);
        }
        records.push(ScoreRecord {
            trajectory_id: t.id.clone(),
            task_id: t.task_id.clone(),
            reward: score_trajectory(t, &golds[&t.task_id], &cfg.rewards),
            violations: validate_with(t, cfg.episode.max_turns),
        });
    }
    match out {
        Some(path) => write_jsonl(path, &records).map_err(jsonl_failure)?,
        None => {
            for r in &records {
                println!("{}", serde_json::to_string(r).expect("record serializes"));
            }
        }
    }
    let bad = records.iter().filter(|r| !r.violations.is_empty()).count();
    if check && bad > 0 {
        return Err(Failure::Validation(anyhow!(
            "{bad} trajectories violate the action grammar"
        )));
    }
    Ok(())
}

fn cmd_serve(config: &Path, addr: Option<String>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let env = Arc::new(Environment::from_config(&cfg).map_err(config_failure)?);
    let addr = addr.unwrap_or_else(|| cfg.service.addr.clone());
    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
    log::info!(
        "listening on {}",
        listener.local_addr().context("local address")?
    );
    serve(
        env,
        listener,
        cfg.service.workers,
        Arc::new(AtomicBool::new(false)),
    )
    .context("serving")?;
    Ok(())
}

fn cmd_init(out: &Path) -> Result<(), Failure> {
    let registry = materialize(&out.join("dbs")).context("building databases")?;
    let cfg = RunConfig::new(out.join("dbs"));
    let tasks: Vec<DialogueTask> = recorded_cases().into_iter().map(|c| c.task).collect();
    write_jsonl(&out.join("tasks.jsonl"), &tasks).map_err(jsonl_failure)?;
    let pack = case_pack(&registry, cfg.episode).context("keying recorded cases")?;
    write_jsonl(&out.join("pack.jsonl"), &pack).map_err(jsonl_failure)?;
    let mut cfg = RunConfig {
        tasks: vec!["tasks.jsonl".into()],
        ..RunConfig::new("dbs")
    };
    cfg.policy = PolicyConfig::Scripted {
        fixtures: "pack.jsonl".into(),
        fallback: None,
    };
    let text = toml::to_string_pretty(&cfg).context("rendering config")?;
    std::fs::write(out.join("config.toml"), text).context("writing config")?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Eval {
            registry,
            dataset,
            predictions,
            json,
        } => cmd_eval(&registry, &dataset, &predictions, json.as_deref()),
        Command::Collect { config, rounds } => cmd_collect(&config, rounds),
        Command::Curriculum {
            profiles,
            tasks,
            out,
            bin_size,
        } => cmd_curriculum(&profiles, &tasks, &out, bin_size),
        Command::ExportSft { store, out } => cmd_export(&store, &out),
        Command::Score {
            config,
            trajectories,
            out,
            check,
        } => cmd_score(&config, &trajectories, out.as_deref(), check),
        Command::Serve { config, addr } => cmd_serve(&config, addr),
        Command::InitFixtures { out } => cmd_init(&out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
