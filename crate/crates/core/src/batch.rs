//! Headless batch of simulated subjects. Each subject is an oracle pilot with
//! seeded tolerance jitter and runs every requested method; sessions run in
//! parallel and results are collected in subject, then method order.

use crate::config::SimConfig;
use crate::control::Method;
use crate::pilot::{AgentKind, AgentPolicy};
use crate::session::{run_session, AgentSource, Session, SessionConfig, SessionError, TrialLog};
use crate::stats::TrialRecord;
use crate::task::{TrialSpec, MEASURED_REPEATS, TRAINING_REPEATS};
use rayon::prelude::*;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use thiserror::Error;

/// Default relative jitter on pilot tolerances.
pub const DEFAULT_JITTER: f64 = 0.2;
/// Default upper bound of the per-press reaction pause, in ticks.
pub const DEFAULT_REACTION_TICKS: u32 = 15;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("agent `{agent}` cannot drive method `{method}`")]
    Incompatible { agent: AgentKind, method: Method },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Session(#[from] SessionError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchSpec {
    pub methods: Vec<Method>,
    /// `None` picks the matching oracle per method.
    pub agent: Option<AgentKind>,
    pub seed: u64,
    pub subjects: usize,
    pub jitter: f64,
    pub reaction_ticks: u32,
    pub sim: SimConfig,
    pub training_repeats: usize,
    pub measured_repeats: usize,
    /// Write one JSONL frame log per session into this directory.
    pub frames_dir: Option<PathBuf>,
}

impl BatchSpec {
    pub fn new(methods: Vec<Method>, seed: u64, subjects: usize) -> Self {
        BatchSpec {
            methods,
            agent: None,
            seed,
            subjects,
            jitter: DEFAULT_JITTER,
            reaction_ticks: DEFAULT_REACTION_TICKS,
            sim: SimConfig::default(),
            training_repeats: TRAINING_REPEATS,
            measured_repeats: MEASURED_REPEATS,
            frames_dir: None,
        }
    }

    pub fn validate(&self) -> Result<(), BatchError> {
        if self.methods.is_empty() || self.subjects == 0 {
            return Err(BatchError::Invalid("need at least one method and one subject".into()));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(BatchError::Invalid(format!("jitter must be in [0, 1), got {}", self.jitter)));
        }
        if let Some(agent) = self.agent {
            if let Some(&method) = self.methods.iter().find(|m| !agent.supports(**m)) {
                return Err(BatchError::Incompatible { agent, method });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionRun {
    pub subject: String,
    pub method: Method,
    pub log: TrialLog,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatchResult {
    pub runs: Vec<SessionRun>,
}

impl BatchResult {
    /// Measured trials of every run, in run order.
    pub fn records(&self) -> Vec<TrialRecord> {
        self.runs.iter().flat_map(|r| r.log.measured.iter().cloned()).collect()
    }

    pub fn timeouts(&self) -> Vec<(&str, Method, TrialSpec)> {
        self.runs
            .iter()
            .flat_map(|r| r.log.timeouts.iter().map(move |t| (r.subject.as_str(), r.method, *t)))
            .collect()
    }
}

pub fn subject_id(i: usize) -> String {
    format!("s{:02}", i + 1)
}

/// Per-subject seed; the schedule seed also mixes in the method.
pub fn subject_seed(base: u64, subject: usize) -> u64 {
    base.wrapping_add((subject as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn run_one(spec: &BatchSpec, subject: usize, method: Method) -> Result<SessionRun, BatchError> {
    let seed = subject_seed(spec.seed, subject);
    let kind = spec.agent.unwrap_or_else(|| AgentKind::for_method(method));
    let base = AgentPolicy {
        reaction_ticks: spec.reaction_ticks,
        ..AgentPolicy::new(kind)
    };
    let mut policy = base.jittered(seed, spec.jitter);
    // Same subject traits for every method, separate reaction-time stream.
    policy.seed = seed ^ (method as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03);
    let cfg = SessionConfig {
        method,
        seed: seed ^ (method as u64 + 1),
        subject: subject_id(subject),
        sim: spec.sim.clone(),
        training_repeats: spec.training_repeats,
        measured_repeats: spec.measured_repeats,
    };
    let mut session = Session::new(cfg)?;
    let mut source = AgentSource::new(policy);
    let log = match &spec.frames_dir {
        Some(dir) => {
            let path = dir.join(format!("{}_{}.jsonl", subject_id(subject), method));
            let mut out = BufWriter::new(File::create(path).map_err(SessionError::from)?);
            let log = run_session(&mut session, &mut source, Some(&mut out))?;
            std::io::Write::flush(&mut out).map_err(SessionError::from)?;
            log
        }
        None => run_session(&mut session, &mut source, None)?,
    };
    Ok(SessionRun {
        subject: subject_id(subject),
        method,
        log,
    })
}

pub fn run_batch(spec: &BatchSpec) -> Result<BatchResult, BatchError> {
    spec.validate()?;
    let jobs: Vec<(usize, Method)> = (0..spec.subjects)
        .flat_map(|s| spec.methods.iter().map(move |&m| (s, m)))
        .collect();
    let runs = jobs
        .into_par_iter()
        .map(|(s, m)| run_one(spec, s, m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BatchResult { runs })
}
