//! `foosball` command line: training, evaluation, estimator benchmarks,
//! live matches and replays.

mod serve;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use foosball::arena::{replay, MatchConfig, MatchLog, SensingMode, SystemClock};
use foosball::env::{TaskKind, TaskSpec};
use foosball::estimator::bench::{write_csv, write_jsonl, CsvUnits};
use foosball::estimator::{run_suite, CameraModel, SuiteConfig};
use foosball::physics::{TableConfig, Team};
use foosball::ppo::{
    evaluate, load_checkpoint, load_for_task, EvalConfig, PpoConfig, TrainConfig, Trainer,
};
use foosball::Error;

#[derive(Parser, Debug)]
#[command(
    name = "foosball",
    version,
    about = "Foosball simulation, training and match service"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Parallel environment instances.
    #[arg(long, global = true)]
    num_envs: Option<usize>,
    /// Directory for metrics, checkpoints, logs and reports.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a policy with PPO (self-play for two-sided tasks).
    Train(TrainArgs),
    /// Evaluate a checkpoint and print a JSON report.
    Eval(EvalArgs),
    /// Score the ball tracker against simulated ground truth.
    BenchEstimator(BenchArgs),
    /// Run a live human-vs-machine match over WebSocket.
    Serve(ServeArgs),
    /// Re-emit the states of a recorded match log.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// TrainConfig JSON; defaults apply to missing keys.
    config: Option<PathBuf>,
    /// Task preset, replacing the config's task.
    #[arg(long)]
    task: Option<String>,
    /// Maximum number of policy updates.
    #[arg(long)]
    updates: Option<usize>,
    /// Control steps collected per environment per update.
    #[arg(long)]
    horizon: Option<usize>,
    /// Environment stepping threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Observe the tracked ball instead of ground truth.
    #[arg(long)]
    filtered: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Policy checkpoint to evaluate.
    checkpoint: PathBuf,
    /// Task preset; defaults to the checkpoint's task.
    #[arg(long)]
    task: Option<String>,
    /// Episodes to play.
    #[arg(long, default_value_t = 1000)]
    episodes: usize,
    /// Opponent checkpoint for two-sided tasks; defaults to a mirror match.
    #[arg(long)]
    opponent: Option<PathBuf>,
    /// Observe the tracked ball instead of ground truth.
    #[arg(long)]
    filtered: bool,
    /// Sample actions instead of using the policy means.
    #[arg(long)]
    stochastic: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// SuiteConfig JSON; defaults apply to missing keys.
    config: Option<PathBuf>,
    /// Also write one plot CSV per run next to the JSONL traces.
    #[arg(long)]
    csv: bool,
    /// Write CSV values in pixels and pixels per frame instead of SI units.
    #[arg(long, requires = "csv")]
    pixels: bool,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// MatchConfig JSON; defaults apply to missing keys.
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub bind: String,
    /// Machine policy checkpoint, replacing the config's.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Match log path; defaults to `<out-dir>/match.jsonl` or `match.jsonl`.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// End the match once every joined client has left.
    #[arg(long)]
    pub exit_when_empty: bool,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    /// Match log written by `serve`.
    log: PathBuf,
    /// Playback speed relative to the recording.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

/// Failure reported as one JSON line on stderr.
#[derive(Debug)]
pub struct Failure {
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::InvalidInput(_) => "invalid_input",
            Error::ContractViolation(_) => "contract_violation",
            Error::Incompatible(_) => "incompatible",
            Error::NonFinite(_) => "non_finite",
            Error::Malformed(_) => "malformed",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e).into()
    }
}

impl Failure {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            kind,
            message: message.into(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            let first = e
                .to_string()
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_owned();
            eprintln!(
                "{}",
                json!({ "error": { "kind": "usage", "message": first } })
            );
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!(
                "{}",
                json!({ "error": { "kind": f.kind, "message": f.message } })
            );
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Train(a) => train(&cli.common, a),
        Command::Eval(a) => eval(&cli.common, a),
        Command::BenchEstimator(a) => bench_estimator(&cli.common, a),
        Command::Serve(a) => serve::serve(
            &cli.common.out_dir,
            cli.common.seed,
            load_match_config(&a)?,
            &a,
        ),
        Command::Replay(a) => replay_log(a),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::new("json", format!("{}: {e}", path.display())))
}

fn print_json(value: &impl serde::Serialize) -> CliResult {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn train(common: &Common, a: TrainArgs) -> CliResult {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(t) = &a.task {
        cfg.task = TaskSpec::preset(TaskKind::parse(t)?);
    }
    if a.filtered {
        cfg.task = cfg.task.with_filtered_ball(true);
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(u) = a.updates {
        cfg.updates = u;
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if common.num_envs.is_some() || a.horizon.is_some() {
        let n = common.num_envs.unwrap_or(cfg.ppo.num_envs);
        let h = a.horizon.unwrap_or(cfg.ppo.horizon);
        let sized = PpoConfig::for_batch(n, h);
        cfg.ppo.num_envs = n;
        cfg.ppo.horizon = h;
        cfg.ppo.minibatch_size = sized.minibatch_size;
    }
    let out_dir = common
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-{}", cfg.task.kind.name(), cfg.seed)));
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(&cfg)?,
    )?;
    let mut trainer = Trainer::new(cfg)?.with_output_dir(&out_dir)?;
    let report = trainer.run()?;
    print_json(&json!({ "out_dir": out_dir, "report": report }))
}

fn eval(common: &Common, a: EvalArgs) -> CliResult {
    let (_, meta) = load_checkpoint(&a.checkpoint)?;
    let mut task = match &a.task {
        Some(t) => TaskSpec::preset(TaskKind::parse(t)?),
        None => meta.task.clone(),
    };
    if a.filtered {
        task = task.with_filtered_ball(true);
    }
    let (policy, _) = load_for_task(&a.checkpoint, &task, None)?;
    let opponent = match (&a.opponent, task.kind.is_two_sided()) {
        (Some(p), true) => Some(load_for_task(p, &task, None)?.0),
        (Some(_), false) => {
            return Err(Failure::new(
                "invalid_input",
                "opponents only apply to two-sided tasks",
            ))
        }
        (None, true) => Some(policy.clone()),
        (None, false) => None,
    };
    let defaults = EvalConfig::default();
    let cfg = EvalConfig {
        episodes: a.episodes,
        num_envs: common
            .num_envs
            .unwrap_or(defaults.num_envs)
            .min(a.episodes.max(1)),
        seed: common.seed.unwrap_or(defaults.seed),
        deterministic: !a.stochastic,
        ..defaults
    };
    let report = evaluate(&policy, &task, opponent.as_ref(), &cfg)?;
    let two_sided = task.kind.is_two_sided();
    let value = json!({
        "checkpoint": a.checkpoint,
        "report": report,
        "win_rate": two_sided.then_some(report.success_rate),
        "loss_rate": two_sided.then_some(report.failure_rate),
    });
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("eval.json"), serde_json::to_string_pretty(&value)?)?;
    }
    print_json(&value)
}

fn bench_estimator(common: &Common, a: BenchArgs) -> CliResult {
    let mut cfg: SuiteConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => SuiteConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let (report, runs) = run_suite(&cfg, &TableConfig::default())?;
    if let Some(dir) = &common.out_dir {
        std::fs::create_dir_all(dir)?;
        for r in &runs {
            let stem = format!(
                "{}_{}",
                serde_json::to_value(r.scenario.kind)?
                    .as_str()
                    .unwrap_or("run"),
                r.scenario.seed
            );
            write_jsonl(r, &dir.join(format!("{stem}.jsonl")))?;
            if a.csv {
                let units = if a.pixels {
                    CsvUnits::Pixels
                } else {
                    CsvUnits::Si
                };
                write_csv(
                    r,
                    &dir.join(format!("{stem}.csv")),
                    units,
                    &CameraModel::default(),
                )?;
            }
        }
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&report)?,
        )?;
    }
    print_json(&report)
}

fn load_match_config(a: &ServeArgs) -> CliResult<MatchConfig> {
    let mut cfg: MatchConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => MatchConfig::default(),
    };
    if let Some(c) = &a.checkpoint {
        cfg.checkpoint = Some(c.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn replay_log(a: ReplayArgs) -> CliResult {
    let file = std::fs::File::open(&a.log)
        .map_err(|e| Failure::new("io", format!("{}: {e}", a.log.display())))?;
    let log = MatchLog::read(std::io::BufReader::new(file))?;
    let mut out = std::io::stdout().lock();
    let mut write_err = None;
    replay(&log, a.speed, &mut SystemClock::new(), &mut |msg| {
        if write_err.is_none() {
            if let Err(e) = writeln!(out, "{}", msg.encode()) {
                write_err = Some(e);
            }
        }
    })?;
    match write_err {
        Some(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

/// Human side and sensing, for the startup banner.
pub fn describe(cfg: &MatchConfig) -> serde_json::Value {
    json!({
        "task": cfg.task.name(),
        "human_side": match cfg.human_side { Team::White => "white", Team::Black => "black" },
        "sensing": match cfg.sensing { SensingMode::GroundTruth => "ground_truth", SensingMode::Filtered => "filtered" },
        "machine": cfg.checkpoint,
    })
}
