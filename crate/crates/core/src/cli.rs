//! Command-line front end: `simulate`, `analyze`, `serve`, `replay`, `config`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use crate::batch::{run_batch, BatchError, BatchSpec, DEFAULT_JITTER, DEFAULT_REACTION_TICKS};
use crate::config::{SimConfig, CONFIG_ENV};
use crate::control::Method;
use crate::pilot::AgentKind;
use crate::server::{serve, ServeOptions};
use crate::session::{read_frames, replay, write_frame, SessionConfig};
use crate::stats::{analyze, read_csv, write_csv, Metric};
use crate::task::{MEASURED_REPEATS, TRAINING_REPEATS};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "admc", version, about = "Adaptive DoF mapping teleoperation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run oracle pilots headless and write a trial CSV.
    Simulate(SimulateArgs),
    /// Outlier filter, Friedman and pairwise Wilcoxon on a trial CSV.
    Analyze(AnalyzeArgs),
    /// Host a live session over WebSocket.
    Serve(ServeArgs),
    /// Re-run the inputs of a JSONL frame log and compare the result.
    Replay(ReplayArgs),
    /// Print the documented default configuration file.
    Config,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Classic,
    Continuous,
    Threshold,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Classic => vec![Method::Classic],
            MethodArg::Continuous => vec![Method::Continuous],
            MethodArg::Threshold => vec![Method::Threshold],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SingleMethod {
    Classic,
    Continuous,
    Threshold,
}

impl From<SingleMethod> for Method {
    fn from(m: SingleMethod) -> Self {
        match m {
            SingleMethod::Classic => Method::Classic,
            SingleMethod::Continuous => Method::Continuous,
            SingleMethod::Threshold => Method::Threshold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AgentArg {
    ClassicOracle,
    AdmcOracle,
}

impl From<AgentArg> for AgentKind {
    fn from(a: AgentArg) -> Self {
        match a {
            AgentArg::ClassicOracle => AgentKind::ClassicOracle,
            AgentArg::AdmcOracle => AgentKind::AdmcOracle,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Time,
    Switches,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Text,
    Kv,
}

#[derive(Debug, Args)]
pub struct ConfigArg {
    /// Configuration file (TOML). Falls back to $ADMC_CONFIG, then built-in defaults.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

impl ConfigArg {
    pub fn load(&self) -> Result<SimConfig, CliError> {
        let path = self.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        match path {
            Some(p) => SimConfig::load(&p).map_err(|e| CliError::Usage(e.to_string())),
            None => Ok(SimConfig::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Control method(s) to run.
    #[arg(long, value_enum, default_value = "all")]
    pub method: MethodArg,
    /// Pilot agent; defaults to the matching oracle for each method.
    #[arg(long, value_enum)]
    pub agent: Option<AgentArg>,
    /// Base seed for schedules and subject jitter.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of simulated subjects.
    #[arg(long, default_value_t = 12)]
    pub subjects: usize,
    /// Relative jitter applied to pilot tolerances per subject.
    #[arg(long, default_value_t = DEFAULT_JITTER)]
    pub jitter: f64,
    /// Upper bound of the random pause before each button press, in ticks.
    #[arg(long, default_value_t = DEFAULT_REACTION_TICKS)]
    pub reaction_ticks: u32,
    /// Training passes over the eight spawn positions.
    #[arg(long, default_value_t = TRAINING_REPEATS)]
    pub training: usize,
    /// Measured passes over the eight spawn positions.
    #[arg(long, default_value_t = MEASURED_REPEATS)]
    pub measured: usize,
    /// Output CSV of measured trials.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Directory for one JSONL frame log per session.
    #[arg(long, value_name = "DIR")]
    pub frames: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trial CSV produced by `simulate`.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Dependent variable.
    #[arg(long, value_enum, default_value = "time")]
    pub metric: MetricArg,
    /// Human-readable text or `key=value` lines.
    #[arg(long, value_enum, default_value = "text")]
    pub format: FormatArg,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// TCP port; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Interface to bind.
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Control method for the session.
    #[arg(long, value_enum)]
    pub method: SingleMethod,
    /// Schedule seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Subject id recorded in the trial CSV.
    #[arg(long, default_value = "live")]
    pub subject: String,
    /// JSONL frame log.
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
    /// Trial CSV written when the server stops.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// JSONL frame log to replay.
    #[arg(long, value_name = "PATH")]
    pub log: PathBuf,
    /// Write the reproduced frame log here.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArg,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze_cmd(a),
        Command::Serve(a) => serve_cmd(a),
        Command::Replay(a) => replay_cmd(a),
        Command::Config => {
            print!("{}", SimConfig::default().to_toml_string());
            Ok(())
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let spec = BatchSpec {
        methods: a.method.methods(),
        agent: a.agent.map(AgentKind::from),
        seed: a.seed,
        subjects: a.subjects,
        jitter: a.jitter,
        reaction_ticks: a.reaction_ticks,
        sim: a.config.load()?,
        training_repeats: a.training,
        measured_repeats: a.measured,
        frames_dir: a.frames.clone(),
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(dir) = &a.frames {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    }
    let result = run_batch(&spec).map_err(|e| match e {
        BatchError::Incompatible { .. } | BatchError::Invalid(_) => CliError::Usage(e.to_string()),
        BatchError::Session(_) => runtime(e),
    })?;
    let records = result.records();
    let mut out = create(&a.out)?;
    write_csv(&mut out, &records).map_err(runtime)?;
    out.flush().map_err(runtime)?;
    log::info!("{} sessions, {} measured trials -> {}", result.runs.len(), records.len(), a.out.display());

    let timeouts = result.timeouts();
    if !timeouts.is_empty() {
        for (subject, method, spec) in &timeouts {
            eprintln!("timeout: subject {subject}, {method}, trial {} (spawn {})", spec.index, spec.spawn);
        }
        return Err(runtime(format!("{} trial(s) hit the time cap", timeouts.len())));
    }
    Ok(())
}

fn analyze_cmd(a: AnalyzeArgs) -> Result<(), CliError> {
    let records = read_csv(open(&a.input)?).map_err(runtime)?;
    let metric = match a.metric {
        MetricArg::Time => Metric::Time,
        MetricArg::Switches => Metric::Switches,
    };
    let report = analyze(&records, metric).map_err(runtime)?;
    match a.format {
        FormatArg::Text => print!("{}", report.to_text()),
        FormatArg::Kv => print!("{}", report.to_kv()),
    }
    Ok(())
}

fn serve_cmd(a: ServeArgs) -> Result<(), CliError> {
    let cfg = SessionConfig {
        subject: a.subject.clone(),
        sim: a.config.load()?,
        ..SessionConfig::new(a.method.into(), a.seed)
    };
    let mut opts = ServeOptions::new(cfg);
    opts.log = a.log.clone();
    let handle = serve((a.host.as_str(), a.port), opts).map_err(runtime)?;
    println!("listening on ws://{}", handle.local_addr());
    let log = handle.wait().map_err(runtime)?;
    if let Some(path) = &a.out {
        let mut out = create(path)?;
        write_csv(&mut out, &log.measured).map_err(runtime)?;
        out.flush().map_err(runtime)?;
    }
    Ok(())
}

fn replay_cmd(a: ReplayArgs) -> Result<(), CliError> {
    let sim = a.config.load()?;
    let frames = read_frames(open(&a.log)?).map_err(runtime)?;
    let again = replay(&frames, &sim).map_err(runtime)?;
    if let Some(path) = &a.out {
        let mut out = create(path)?;
        for f in &again {
            write_frame(&mut out, f).map_err(runtime)?;
        }
        out.flush().map_err(runtime)?;
    }
    match frames.iter().zip(&again).position(|(x, y)| x != y) {
        None if frames.len() == again.len() => {
            println!("replay matches: {} frames", frames.len());
            Ok(())
        }
        None => Err(runtime(format!(
            "replay length differs: {} recorded, {} reproduced",
            frames.len(),
            again.len()
        ))),
        Some(i) => Err(runtime(format!("replay diverges at tick {}", frames[i].tick))),
    }
}

/// Parses the process arguments and runs; clap handles `--help` and usage errors.
pub fn main_entry() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
