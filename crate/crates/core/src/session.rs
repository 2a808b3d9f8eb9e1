//! Fixed-step session loop. It binds the task environment, the suggestion
//! engine and a controller to an input source, and emits one [`StateFrame`]
//! per tick.
//!
//! Tick order: poll input, controller tick (against the suggestions from the
//! previous tick), env step, bookkeeping, suggestion recompute, frame.

use crate::config::SimConfig;
use crate::control::{ArrowState, ControlConfig, ControllerState, FeedbackEvent, IndicatorState, InputSample, Method};
use crate::motion::{MotionVector7, Pose};
use crate::pilot::{AgentPolicy, Pilot};
use crate::stats::TrialRecord;
use crate::suggest::{compute_suggestions, SuggestionSet};
use crate::task::{
    make_schedule_with, EnvPhase, EnvState, GripperState, ObjectStatus, TaskEnv, TrialEvent, TrialKind, TrialSpec,
    MEASURED_REPEATS, TRAINING_REPEATS,
};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

/// Schema version carried by every outbound message.
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error("session is not running")]
    NotRunning,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("replay: {0}")]
    Replay(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub method: Method,
    pub seed: u64,
    pub subject: String,
    pub sim: SimConfig,
    pub training_repeats: usize,
    pub measured_repeats: usize,
}

impl SessionConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        SessionConfig {
            method,
            seed,
            subject: "s01".into(),
            sim: SimConfig::default(),
            training_repeats: TRAINING_REPEATS,
            measured_repeats: MEASURED_REPEATS,
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        self.sim.validate().map_err(|e| SessionError::Config(e.to_string()))?;
        if self.training_repeats + self.measured_repeats == 0 {
            return Err(SessionError::Config("schedule has no trials".into()));
        }
        if self.subject.is_empty() {
            return Err(SessionError::Config("empty subject id".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Idle,
    Running,
    Paused,
    Finished,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialInfo {
    pub index: usize,
    pub total: usize,
    pub spawn: usize,
    pub kind: TrialKind,
    pub phase: EnvPhase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub v: u32,
    pub tick: u64,
    pub status: SessionStatus,
    pub method: Method,
    pub seed: u64,
    pub trial: Option<TrialInfo>,
    /// Running time of the current trial.
    pub clock_s: f64,
    pub gripper: GripperState,
    pub object: Pose,
    pub object_status: ObjectStatus,
    pub arrows: ArrowState,
    pub indicator: IndicatorState,
    pub events: Vec<FeedbackEvent>,
    pub trial_events: Vec<TrialEvent>,
    /// Switches in the current trial.
    pub switch_count: u32,
    pub total_switches: u32,
    /// Input applied during this tick.
    pub input: InputSample,
    pub motion: MotionVector7,
}

/// Everything the server sends, tagged by `type`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Outbound {
    Frame(StateFrame),
    Error { v: u32, message: String },
    Busy { v: u32, message: String },
}

impl Outbound {
    pub fn error(message: impl Into<String>) -> Self {
        Outbound::Error {
            v: PROTOCOL_VERSION,
            message: message.into(),
        }
    }

    pub fn busy() -> Self {
        Outbound::Busy {
            v: PROTOCOL_VERSION,
            message: "session already has a client".into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("outbound messages serialize")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrialLog {
    pub measured: Vec<TrialRecord>,
    pub training: Vec<TrialRecord>,
    /// Trials abandoned at the time cap.
    pub timeouts: Vec<TrialSpec>,
}

pub struct Session {
    cfg: SessionConfig,
    task: TaskEnv,
    control: ControlConfig,
    schedule: Vec<TrialSpec>,
    next_trial: usize,
    env: Option<EnvState>,
    controller: ControllerState,
    suggestions: SuggestionSet,
    status: SessionStatus,
    tick: u64,
    trial_switch_base: u32,
    log: TrialLog,
    last: Option<(TickSummary, InputSample)>,
}

#[derive(Clone, Debug, Default)]
struct TickSummary {
    motion: MotionVector7,
    arrows: ArrowState,
    events: Vec<FeedbackEvent>,
    trial_events: Vec<TrialEvent>,
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Result<Self, SessionError> {
        let schedule = make_schedule_with(cfg.seed, cfg.training_repeats, cfg.measured_repeats);
        Self::with_schedule(cfg, schedule)
    }

    pub fn with_schedule(cfg: SessionConfig, schedule: Vec<TrialSpec>) -> Result<Self, SessionError> {
        cfg.validate()?;
        if schedule.is_empty() {
            return Err(SessionError::Config("empty schedule".into()));
        }
        let task = TaskEnv::new(cfg.sim.scene.clone(), cfg.sim.limits, cfg.sim.dt())
            .map_err(|e| SessionError::Config(e.to_string()))?;
        Ok(Session {
            control: cfg.sim.control(),
            controller: ControllerState::new(cfg.method),
            task,
            schedule,
            next_trial: 0,
            env: None,
            suggestions: SuggestionSet::empty(0),
            status: SessionStatus::Idle,
            tick: 0,
            trial_switch_base: 0,
            log: TrialLog::default(),
            last: None,
            cfg,
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn task(&self) -> &TaskEnv {
        &self.task
    }

    pub fn env(&self) -> Option<&EnvState> {
        self.env.as_ref()
    }

    pub fn controller(&self) -> &ControllerState {
        &self.controller
    }

    pub fn suggestions(&self) -> &SuggestionSet {
        &self.suggestions
    }

    pub fn schedule(&self) -> &[TrialSpec] {
        &self.schedule
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn log(&self) -> &TrialLog {
        &self.log
    }

    pub fn into_log(self) -> TrialLog {
        self.log
    }

    /// Begins the first trial, or resumes after a pause.
    pub fn start(&mut self) {
        match self.status {
            SessionStatus::Idle => {
                self.status = SessionStatus::Running;
                self.begin_next_trial();
            }
            SessionStatus::Paused => self.status = SessionStatus::Running,
            SessionStatus::Running | SessionStatus::Finished => {}
        }
    }

    pub fn pause(&mut self) {
        if self.status == SessionStatus::Running {
            self.status = SessionStatus::Paused;
        }
    }

    /// Back to tick 0 with the same schedule; the log is discarded.
    pub fn reset(&mut self) {
        let schedule = std::mem::take(&mut self.schedule);
        *self = Session::with_schedule(self.cfg.clone(), schedule).expect("config was validated");
    }

    fn begin_next_trial(&mut self) {
        match self.schedule.get(self.next_trial) {
            Some(&spec) => {
                self.next_trial += 1;
                let env = self.task.spawn_trial(spec);
                self.controller.reset_for_trial();
                self.trial_switch_base = self.controller.switch_count;
                self.suggestions = self.suggest(&env);
                self.env = Some(env);
            }
            None => {
                self.env = None;
                self.suggestions = SuggestionSet::empty(self.tick);
                self.status = SessionStatus::Finished;
            }
        }
    }

    fn suggest(&self, env: &EnvState) -> SuggestionSet {
        compute_suggestions(&self.task, env, &self.cfg.sim.weights, self.tick)
            .unwrap_or_else(|_| SuggestionSet::empty(self.tick))
    }

    fn record(&mut self, spec: TrialSpec, time_s: f64) {
        let r = TrialRecord {
            subject: self.cfg.subject.clone(),
            method: self.cfg.method,
            trial: spec.index,
            time_s,
            switches: self.controller.switch_count - self.trial_switch_base,
            spawn: spec.spawn,
        };
        match spec.kind {
            TrialKind::Measured => self.log.measured.push(r),
            TrialKind::Training => self.log.training.push(r),
        }
    }

    /// Advances one tick with `input` and returns the resulting frame.
    pub fn step(&mut self, input: InputSample) -> Result<StateFrame, SessionError> {
        if self.status != SessionStatus::Running {
            return Err(SessionError::NotRunning);
        }
        let mut env = self.env.take().expect("running session has a trial");
        let mut summary = TickSummary::default();

        if env.is_running() {
            self.controller.tick = self.tick;
            let out = self.controller.tick(&self.suggestions, &input, &self.control);
            summary.motion = out.motion;
            summary.arrows = out.arrows;
            summary.events = out.events;
        }
        summary.trial_events = self
            .task
            .step(&mut env, &summary.motion)
            .expect("env is never stepped while idle");
        self.tick += 1;

        let mut next = false;
        for ev in &summary.trial_events {
            match *ev {
                TrialEvent::Completed { time_s } => self.record(env.spec, time_s),
                TrialEvent::ReturnedHome => next = true,
                _ => {}
            }
        }
        if env.is_running() && env.clock() >= self.cfg.sim.trial_time_cap_s {
            log::warn!("trial {} hit the time cap", env.spec.index);
            self.log.timeouts.push(env.spec);
            next = true;
        }

        if next {
            self.begin_next_trial();
        } else {
            self.suggestions = self.suggest(&env);
            self.env = Some(env);
        }
        self.last = Some((summary, input));
        Ok(self.frame())
    }

    /// Snapshot of the current state. Before the first tick this is the
    /// tick-0 frame with no input applied.
    pub fn frame(&self) -> StateFrame {
        let (summary, input) = self.last.clone().unwrap_or_default();
        let (gripper, object, object_status, clock_s, trial) = match &self.env {
            Some(env) => (
                env.gripper,
                env.object,
                env.object_status,
                env.clock(),
                Some(TrialInfo {
                    index: env.spec.index,
                    total: self.schedule.len(),
                    spawn: env.spec.spawn,
                    kind: env.spec.kind,
                    phase: env.phase,
                }),
            ),
            None => (
                GripperState {
                    pose: self.task.scene.start_pose,
                    aperture: 1.0,
                    holding: false,
                },
                self.task.scene.spawn_pose(0),
                ObjectStatus::OnTable,
                0.0,
                None,
            ),
        };
        StateFrame {
            v: PROTOCOL_VERSION,
            tick: self.tick,
            status: self.status,
            method: self.cfg.method,
            seed: self.cfg.seed,
            trial,
            clock_s,
            gripper,
            object,
            object_status,
            arrows: summary.arrows,
            indicator: self.controller.indicator(),
            events: summary.events,
            trial_events: summary.trial_events,
            switch_count: self.controller.switch_count - self.trial_switch_base,
            total_switches: self.controller.switch_count,
            input,
            motion: summary.motion,
        }
    }
}

/// Supplies one input per tick; `None` ends the run.
pub trait InputSource {
    fn next_input(&mut self, session: &Session) -> Option<InputSample>;
}

/// Scripted pilot driving the session.
pub struct AgentSource {
    pilot: Pilot,
    trial: Option<usize>,
}

impl AgentSource {
    pub fn new(policy: AgentPolicy) -> Self {
        AgentSource {
            pilot: Pilot::new(policy),
            trial: None,
        }
    }
}

impl InputSource for AgentSource {
    fn next_input(&mut self, session: &Session) -> Option<InputSample> {
        let env = session.env()?;
        if self.trial != Some(env.spec.index) {
            self.trial = Some(env.spec.index);
            self.pilot.reset();
        }
        Some(self.pilot.act(session.task(), env, session.controller(), &session.config().sim.weights))
    }
}

/// A recorded input trace.
pub struct ReplaySource {
    inputs: std::vec::IntoIter<InputSample>,
}

impl ReplaySource {
    pub fn new(inputs: Vec<InputSample>) -> Self {
        ReplaySource {
            inputs: inputs.into_iter(),
        }
    }
}

impl InputSource for ReplaySource {
    fn next_input(&mut self, _: &Session) -> Option<InputSample> {
        self.inputs.next()
    }
}

/// A fixed number of idle ticks.
pub struct IdleSource(pub u64);

impl InputSource for IdleSource {
    fn next_input(&mut self, _: &Session) -> Option<InputSample> {
        self.0 = self.0.checked_sub(1)?;
        Some(InputSample::idle())
    }
}

/// Collapses the messages received within one tick: axes keep the latest
/// value, a button press is held until the tick consumes it.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InputLatch {
    axis1: f64,
    axis2: f64,
    button: bool,
}

impl InputLatch {
    pub fn push(&mut self, input: InputSample) {
        self.axis1 = input.axis1;
        self.axis2 = input.axis2;
        self.button |= input.button;
    }

    /// The input for this tick. Axes persist; the button does not.
    pub fn take(&mut self) -> InputSample {
        let out = InputSample::new(self.axis1, self.axis2, self.button);
        self.button = false;
        out
    }

    pub fn clear(&mut self) {
        *self = InputLatch::default();
    }
}

/// Live input from another thread, read once per tick without blocking.
pub struct LiveSource {
    rx: std::sync::mpsc::Receiver<InputSample>,
    latch: InputLatch,
}

impl LiveSource {
    pub fn new(rx: std::sync::mpsc::Receiver<InputSample>) -> Self {
        LiveSource {
            rx,
            latch: InputLatch::default(),
        }
    }
}

impl InputSource for LiveSource {
    fn next_input(&mut self, _: &Session) -> Option<InputSample> {
        loop {
            match self.rx.try_recv() {
                Ok(input) => self.latch.push(input),
                Err(std::sync::mpsc::TryRecvError::Empty) => return Some(self.latch.take()),
                Err(std::sync::mpsc::TryRecvError::Disconnected) => return None,
            }
        }
    }
}

pub fn write_frame<W: Write>(out: &mut W, frame: &StateFrame) -> Result<(), SessionError> {
    serde_json::to_writer(&mut *out, &Outbound::Frame(frame.clone()))?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Runs until the schedule is done or the source is exhausted. The session
/// is started if needed; with a sink, the current frame is written first
/// and then one frame per tick.
pub fn run_session(
    session: &mut Session,
    source: &mut dyn InputSource,
    mut sink: Option<&mut dyn Write>,
) -> Result<TrialLog, SessionError> {
    session.start();
    if let Some(out) = sink.as_mut() {
        write_frame(out, &session.frame())?;
    }
    while session.status() == SessionStatus::Running {
        let Some(input) = source.next_input(session) else { break };
        let frame = session.step(input)?;
        if let Some(out) = sink.as_mut() {
            write_frame(out, &frame)?;
        }
    }
    Ok(session.log().clone())
}

/// Reads a JSONL frame log.
pub fn read_frames<R: BufRead>(input: R) -> Result<Vec<StateFrame>, SessionError> {
    let mut frames = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Outbound>(&line) {
            Ok(Outbound::Frame(f)) => frames.push(f),
            Ok(_) => {}
            Err(e) => return Err(SessionError::Replay(format!("line {}: {e}", i + 1))),
        }
    }
    Ok(frames)
}

/// Inputs applied by a run, recovered from its frame log. Only frames that
/// follow a tick carry an applied input, so the leading idle-status frame is
/// skipped.
pub fn inputs_from_frames(frames: &[StateFrame]) -> Vec<InputSample> {
    frames
        .windows(2)
        .filter(|w| w[1].tick == w[0].tick + 1)
        .map(|w| w[1].input)
        .collect()
}

/// Trials visited by a frame log, in order of first appearance, padded to the
/// schedule length the frames report. Padding entries are never reached by a
/// replay of the same log.
pub fn schedule_from_frames(frames: &[StateFrame]) -> Vec<TrialSpec> {
    let mut out: Vec<TrialSpec> = Vec::new();
    let mut total = 0;
    for info in frames.iter().filter_map(|f| f.trial) {
        total = total.max(info.total);
        if out.last().is_none_or(|t| t.index != info.index) {
            out.push(TrialSpec {
                index: info.index,
                spawn: info.spawn,
                kind: info.kind,
            });
        }
    }
    for index in out.len()..total {
        out.push(TrialSpec {
            index,
            spawn: 0,
            kind: TrialKind::Measured,
        });
    }
    out
}

/// Re-runs the inputs recorded in `frames` through a fresh session with the
/// same method, seed and visited trials, and returns the new frame log.
pub fn replay(frames: &[StateFrame], sim: &SimConfig) -> Result<Vec<StateFrame>, SessionError> {
    let first = frames.first().ok_or_else(|| SessionError::Replay("empty frame log".into()))?;
    if first.tick != 0 {
        return Err(SessionError::Replay(format!("log starts at tick {}, expected 0", first.tick)));
    }
    // A reset restarts the tick count; only the first run is replayed.
    let end = frames
        .windows(2)
        .position(|w| w[1].tick != w[0].tick + 1)
        .map_or(frames.len(), |i| i + 1);
    let frames = &frames[..end];
    let schedule = schedule_from_frames(frames);
    if schedule.is_empty() {
        return Err(SessionError::Replay("log contains no trial".into()));
    }
    let cfg = SessionConfig {
        sim: sim.clone(),
        ..SessionConfig::new(first.method, first.seed)
    };
    let mut session = Session::with_schedule(cfg, schedule)?;
    let mut source = ReplaySource::new(inputs_from_frames(frames));
    session.start();
    let mut out = vec![session.frame()];
    while session.status() == SessionStatus::Running {
        let Some(input) = source.next_input(&session) else { break };
        out.push(session.step(input)?);
    }
    Ok(out)
}
