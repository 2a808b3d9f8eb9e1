//! Control methods: mapping two-axis device input onto gripper motion.
//!
//! * [`Method::Classic`] cycles through four fixed two-DoF modes.
//! * [`Method::Continuous`] drives the gripper along one selected suggestion
//!   with a single axis and always shows the current optimal suggestion as a
//!   second arrow.
//! * [`Method::Threshold`] is the same single-axis control, but the optimal
//!   suggestion is only surfaced (with a vibration pulse and a 1 kHz tone)
//!   once it diverges from the active direction by more than a set
//!   cosine dissimilarity.
//!
//! Every transition takes the state by `&mut` and is otherwise pure, so a
//! recorded input trace replays to the same result.

use crate::motion::{cosine_dissimilarity, DofWeights, MotionVector7, SpeedLimits, Vec3};
use crate::suggest::{ModeId, SuggestionSet};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Axis deflection below which the user counts as not moving.
pub const DEAD_ZONE: f64 = 0.05;

pub const CLASSIC_MODES: u8 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Classic,
    Continuous,
    Threshold,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Classic, Method::Continuous, Method::Threshold];

    pub fn is_adaptive(self) -> bool {
        self != Method::Classic
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Classic => "classic",
            Method::Continuous => "continuous",
            Method::Threshold => "threshold",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classic" => Ok(Method::Classic),
            "continuous" => Ok(Method::Continuous),
            "threshold" => Ok(Method::Threshold),
            other => Err(format!("unknown method `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct InputSample {
    pub axis1: f64,
    pub axis2: f64,
    /// Rising edge of the switch button during this tick.
    pub button: bool,
}

impl InputSample {
    /// Clamps axes into `[-1, 1]`; non-finite values read as zero.
    pub fn new(axis1: f64, axis2: f64, button: bool) -> Self {
        let clean = |a: f64| if a.is_finite() { a.clamp(-1.0, 1.0) } else { 0.0 };
        InputSample {
            axis1: clean(axis1),
            axis2: clean(axis2),
            button,
        }
    }

    pub fn idle() -> Self {
        Self::default()
    }

    pub fn press() -> Self {
        Self::new(0.0, 0.0, true)
    }

    pub fn forward(axis1: f64) -> Self {
        Self::new(axis1, 0.0, false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    /// Percent cosine dissimilarity that must be exceeded.
    pub threshold_pct: f64,
    /// Minimum ticks between two feedback episodes.
    pub debounce_ticks: u64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            threshold_pct: 20.0,
            debounce_ticks: 25,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.threshold_pct > 0.0 && self.threshold_pct < 100.0 {
            Ok(())
        } else {
            Err("threshold must lie strictly between 0 and 100 percent".into())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ControlConfig {
    pub limits: SpeedLimits,
    pub weights: DofWeights,
    pub threshold: ThresholdConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackKind {
    VibrationPulse,
    #[serde(rename = "tone_1khz")]
    Tone1kHz,
    SuggestionAppeared,
    ModeSwitched,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackEvent {
    pub kind: FeedbackKind,
    pub tick: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorStyle {
    Spheres4,
    Cubes5,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorState {
    pub style: IndicatorStyle,
    pub highlighted: usize,
    /// Per slot: available (blue) or not (gray).
    pub slots: Vec<bool>,
    /// Shown only while the user is not moving the robot.
    pub visible: bool,
}

/// Light blue: first axis / active mapping. Dark blue: second axis or suggestion.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ArrowState {
    pub light: Option<MotionVector7>,
    pub dark: Option<MotionVector7>,
}

/// Where the switch button's cursor sits in the adaptive cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleSlot {
    /// Keep the movement that was active before cycling started.
    Continue,
    Suggestion(ModeId),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdmcState {
    pub active_direction: MotionVector7,
    pub active_mode: Option<ModeId>,
    pub suggestions: Option<SuggestionSet>,
    /// Threshold only: a new suggestion has been announced and not yet dealt with.
    pub pending: bool,
    pub cursor: CycleSlot,
    before_cycle: (MotionVector7, Option<ModeId>),
    last_feedback_tick: Option<u64>,
}

impl Default for AdmcState {
    fn default() -> Self {
        AdmcState {
            active_direction: MotionVector7::zero(),
            active_mode: None,
            suggestions: None,
            pending: false,
            cursor: CycleSlot::Continue,
            before_cycle: (MotionVector7::zero(), None),
            last_feedback_tick: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerState {
    pub method: Method,
    /// Classic mode in `1..=4`.
    pub classic_mode: u8,
    pub admc: AdmcState,
    pub switch_count: u32,
    pub moving: bool,
    pub tick: u64,
}

/// Everything a controller tick produces besides its new state.
#[derive(Clone, Debug, PartialEq)]
pub struct TickOutput {
    pub motion: MotionVector7,
    pub arrows: ArrowState,
    pub indicator: IndicatorState,
    pub events: Vec<FeedbackEvent>,
}

impl ControllerState {
    pub fn new(method: Method) -> Self {
        ControllerState {
            method,
            classic_mode: 1,
            admc: AdmcState::default(),
            switch_count: 0,
            moving: false,
            tick: 0,
        }
    }

    /// Mapping state goes back to its initial value; counters are kept.
    pub fn reset_for_trial(&mut self) {
        self.classic_mode = 1;
        self.admc = AdmcState::default();
        self.moving = false;
    }

    pub fn indicator(&self) -> IndicatorState {
        match self.method {
            Method::Classic => IndicatorState {
                style: IndicatorStyle::Spheres4,
                highlighted: (self.classic_mode - 1) as usize,
                slots: vec![true; CLASSIC_MODES as usize],
                visible: !self.moving,
            },
            _ => {
                let highlighted = match self.admc.cursor {
                    CycleSlot::Suggestion(m) => m.slot(),
                    CycleSlot::Continue => self.admc.active_mode.map_or(0, ModeId::slot),
                };
                let slots = self
                    .admc
                    .suggestions
                    .as_ref()
                    .map_or([false; 5], |s| s.applicability());
                IndicatorState {
                    style: IndicatorStyle::Cubes5,
                    highlighted,
                    slots: slots.to_vec(),
                    visible: !self.moving,
                }
            }
        }
    }

    /// One control tick: button edge first, then the method's mapping.
    pub fn tick(&mut self, suggestions: &SuggestionSet, input: &InputSample, cfg: &ControlConfig) -> TickOutput {
        let mut events = Vec::new();
        if input.button {
            events.push(handle_switch(self, suggestions));
        }
        let (motion, arrows) = match self.method {
            Method::Classic => {
                self.moving = input.axis1.abs() > DEAD_ZONE || input.axis2.abs() > DEAD_ZONE;
                (classic_map(self, input, &cfg.limits), classic_arrows(self.classic_mode))
            }
            Method::Continuous => continuous_tick(self, suggestions, input, &cfg.limits),
            Method::Threshold => {
                let (m, a, ev) = threshold_tick(self, suggestions, input, cfg);
                events.extend(ev);
                (m, a)
            }
        };
        let out = TickOutput {
            motion,
            arrows,
            indicator: self.indicator(),
            events,
        };
        self.tick += 1;
        out
    }
}

/// Unit direction of each DoF reachable from a Classic `(mode, axis)` pair.
fn classic_axis_dof(mode: u8, axis: u8) -> Option<MotionVector7> {
    match (mode, axis) {
        (1, 1) => Some(MotionVector7::from_translation(Vec3::x())),
        (1, 2) => Some(MotionVector7::from_translation(Vec3::y())),
        (2, 1) => Some(MotionVector7::from_translation(Vec3::z())),
        // Roll about the gripper's forward axis in its start pose (world X).
        (2, 2) => Some(MotionVector7::from_rotation(Vec3::x())),
        (3, 1) => Some(MotionVector7::from_rotation(Vec3::z())),
        (3, 2) => Some(MotionVector7::from_rotation(Vec3::y())),
        (4, 1) => Some(MotionVector7::from_finger(1.0)),
        _ => None,
    }
}

fn scale_by_caps(v: MotionVector7, limits: &SpeedLimits) -> MotionVector7 {
    MotionVector7::new(
        v.translation * limits.translation,
        v.rotation * limits.rotation,
        v.finger * limits.finger,
    )
}

pub fn classic_map(state: &ControllerState, input: &InputSample, limits: &SpeedLimits) -> MotionVector7 {
    let mode = state.classic_mode;
    let mut v = MotionVector7::zero();
    for (axis, value) in [(1u8, input.axis1), (2u8, input.axis2)] {
        if let Some(dof) = classic_axis_dof(mode, axis) {
            if value != 0.0 {
                v = v + dof * value;
            }
        }
    }
    scale_by_caps(v, limits)
}

pub fn classic_arrows(mode: u8) -> ArrowState {
    ArrowState {
        light: classic_axis_dof(mode, 1),
        dark: classic_axis_dof(mode, 2),
    }
}

/// Velocity along `direction` at deflection `axis1`: the direction is scaled
/// until the first component group reaches its speed cap.
pub fn admc_motion(direction: &MotionVector7, axis1: f64, limits: &SpeedLimits) -> MotionVector7 {
    if axis1 == 0.0 || direction.is_zero() {
        return MotionVector7::zero();
    }
    let mut scale = f64::INFINITY;
    let t = direction.translation.norm();
    let r = direction.rotation.norm();
    let f = direction.finger.abs();
    if t > 0.0 {
        scale = scale.min(limits.translation / t);
    }
    if r > 0.0 {
        scale = scale.min(limits.rotation / r);
    }
    if f > 0.0 {
        scale = scale.min(limits.finger / f);
    }
    *direction * (axis1 * scale)
}

fn next_slot(cursor: CycleSlot, suggestions: &SuggestionSet) -> CycleSlot {
    let order: Vec<CycleSlot> = ModeId::ALL
        .iter()
        .filter(|m| suggestions.get(**m).applicable)
        .map(|m| CycleSlot::Suggestion(*m))
        .chain(std::iter::once(CycleSlot::Continue))
        .collect();
    match order.iter().position(|s| *s == cursor) {
        Some(i) => order[(i + 1) % order.len()],
        // The cursor's suggestion became inapplicable: continue with the
        // next applicable one in rank order.
        None => {
            let rank = match cursor {
                CycleSlot::Suggestion(m) => m.slot(),
                CycleSlot::Continue => usize::MAX,
            };
            order
                .iter()
                .copied()
                .find(|s| matches!(s, CycleSlot::Suggestion(m) if m.slot() > rank))
                .unwrap_or(CycleSlot::Continue)
        }
    }
}

/// A button press: Classic advances the mode, adaptive methods advance the
/// highlighted suggestion and make it the active direction.
pub fn handle_switch(state: &mut ControllerState, suggestions: &SuggestionSet) -> FeedbackEvent {
    state.switch_count += 1;
    match state.method {
        Method::Classic => {
            state.classic_mode = state.classic_mode % CLASSIC_MODES + 1;
        }
        _ => {
            let a = &mut state.admc;
            if a.cursor == CycleSlot::Continue {
                a.before_cycle = (a.active_direction, a.active_mode);
            }
            a.cursor = next_slot(a.cursor, suggestions);
            match a.cursor {
                CycleSlot::Suggestion(m) => {
                    a.active_direction = suggestions.get(m).direction;
                    a.active_mode = Some(m);
                }
                CycleSlot::Continue => {
                    (a.active_direction, a.active_mode) = a.before_cycle;
                }
            }
            a.pending = false;
            a.suggestions = Some(suggestions.clone());
        }
    }
    FeedbackEvent {
        kind: FeedbackKind::ModeSwitched,
        tick: state.tick,
    }
}

fn admc_common(state: &mut ControllerState, suggestions: &SuggestionSet, input: &InputSample, limits: &SpeedLimits) -> MotionVector7 {
    state.admc.suggestions = Some(suggestions.clone());
    state.moving = input.axis1.abs() > DEAD_ZONE;
    if state.moving {
        // Moving commits the highlighted choice.
        state.admc.cursor = CycleSlot::Continue;
    }
    admc_motion(&state.admc.active_direction, input.axis1, limits)
}

fn light_arrow(state: &ControllerState) -> Option<MotionVector7> {
    let d = state.admc.active_direction;
    (!d.is_zero()).then_some(d)
}

pub fn continuous_tick(
    state: &mut ControllerState,
    suggestions: &SuggestionSet,
    input: &InputSample,
    limits: &SpeedLimits,
) -> (MotionVector7, ArrowState) {
    let motion = admc_common(state, suggestions, input, limits);
    let arrows = ArrowState {
        light: light_arrow(state),
        dark: Some(suggestions.optimal().direction),
    };
    (motion, arrows)
}

pub fn threshold_tick(
    state: &mut ControllerState,
    suggestions: &SuggestionSet,
    input: &InputSample,
    cfg: &ControlConfig,
) -> (MotionVector7, ArrowState, Vec<FeedbackEvent>) {
    let motion = admc_common(state, suggestions, input, &cfg.limits);
    let mut events = Vec::new();
    let optimal = suggestions.optimal();
    if state.moving && optimal.applicable {
        if let Ok(d) = cosine_dissimilarity(&state.admc.active_direction, &optimal.direction, &cfg.weights) {
            if d > cfg.threshold.threshold_pct {
                let a = &mut state.admc;
                let rested = a
                    .last_feedback_tick
                    .is_none_or(|t| state.tick >= t + cfg.threshold.debounce_ticks);
                if !a.pending && rested {
                    a.pending = true;
                    a.last_feedback_tick = Some(state.tick);
                    events.extend(
                        [FeedbackKind::VibrationPulse, FeedbackKind::Tone1kHz, FeedbackKind::SuggestionAppeared]
                            .map(|kind| FeedbackEvent { kind, tick: state.tick }),
                    );
                }
            } else {
                state.admc.pending = false;
            }
        }
    }
    let arrows = ArrowState {
        light: light_arrow(state),
        dark: state.admc.pending.then_some(optimal.direction),
    };
    (motion, arrows, events)
}
