//! Scripted pilots that drive the controllers through the same
//! [`InputSample`] interface a human would use.

use crate::control::{ControllerState, InputSample, Method};
use crate::motion::{cosine_dissimilarity, rotation_error, DofWeights};
use crate::suggest::{compute_suggestions, current_target};
use crate::task::{EnvState, TaskEnv};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgentKind {
    ClassicOracle,
    AdmcOracle,
}

impl AgentKind {
    pub fn supports(self, method: Method) -> bool {
        match self {
            AgentKind::ClassicOracle => method == Method::Classic,
            AgentKind::AdmcOracle => method.is_adaptive(),
        }
    }

    pub fn for_method(method: Method) -> Self {
        if method.is_adaptive() {
            AgentKind::AdmcOracle
        } else {
            AgentKind::ClassicOracle
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::ClassicOracle => "classic-oracle",
            AgentKind::AdmcOracle => "admc-oracle",
        })
    }
}

impl FromStr for AgentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classic-oracle" => Ok(AgentKind::ClassicOracle),
            "admc-oracle" => Ok(AgentKind::AdmcOracle),
            other => Err(format!("unknown agent `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicParams {
    /// Settle tolerance for translations, metres.
    pub pos_tolerance: f64,
    /// Settle tolerance for rotations, radians.
    pub rot_tolerance: f64,
    /// Error at which axis deflection starts to fall off linearly.
    pub pos_slowdown: f64,
    pub rot_slowdown: f64,
    /// An already settled phase is re-entered once its error grows past
    /// this multiple of its tolerance.
    pub reentry_factor: f64,
}

impl Default for ClassicParams {
    fn default() -> Self {
        ClassicParams {
            pos_tolerance: 0.004,
            rot_tolerance: 0.02,
            pos_slowdown: 0.03,
            rot_slowdown: 0.15,
            reentry_factor: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmcParams {
    /// Continuous: switch once the optimal suggestion is this dissimilar (percent).
    pub accept_dissimilarity: f64,
}

impl Default for AdmcParams {
    fn default() -> Self {
        AdmcParams {
            accept_dissimilarity: 20.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentPolicy {
    pub kind: AgentKind,
    pub classic: ClassicParams,
    pub admc: AdmcParams,
    /// Scale applied to every axis deflection, in `(0, 1]`.
    pub deflection: f64,
    /// Each press is preceded by a pause of `0..=reaction_ticks` ticks.
    pub reaction_ticks: u32,
    /// Seeds the reaction-time draws.
    pub seed: u64,
}

impl AgentPolicy {
    pub fn new(kind: AgentKind) -> Self {
        AgentPolicy {
            kind,
            classic: ClassicParams::default(),
            admc: AdmcParams::default(),
            deflection: 1.0,
            reaction_ticks: 0,
            seed: 0,
        }
    }

    /// Scales every tolerance by an independent factor in `[1 - amount, 1 + amount]`
    /// and lowers the deflection by up to `amount`.
    pub fn jittered(&self, seed: u64, amount: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut j = |v: f64| v * (1.0 + rng.random_range(-amount..=amount));
        let c = &self.classic;
        AgentPolicy {
            kind: self.kind,
            classic: ClassicParams {
                pos_tolerance: j(c.pos_tolerance),
                rot_tolerance: j(c.rot_tolerance),
                pos_slowdown: j(c.pos_slowdown),
                rot_slowdown: j(c.rot_slowdown),
                reentry_factor: c.reentry_factor,
            },
            admc: AdmcParams {
                accept_dissimilarity: j(self.admc.accept_dissimilarity),
            },
            deflection: self.deflection * (1.0 - rng.random_range(0.0..=amount)),
            reaction_ticks: self.reaction_ticks,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let c = &self.classic;
        let all = [
            c.pos_tolerance,
            c.rot_tolerance,
            c.pos_slowdown,
            c.rot_slowdown,
            c.reentry_factor,
            self.admc.accept_dissimilarity,
            self.deflection,
        ];
        if self.deflection > 1.0 {
            return Err("deflection must not exceed 1".into());
        }
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err("agent parameters must be positive".into())
        }
    }
}

/// Classic plan phases, in execution order, with the mode each one needs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassicPhase {
    YawPitch,
    Planar,
    VerticalRoll,
    Fingers,
}

impl ClassicPhase {
    pub const PLAN: [ClassicPhase; 4] = [
        ClassicPhase::YawPitch,
        ClassicPhase::Planar,
        ClassicPhase::VerticalRoll,
        ClassicPhase::Fingers,
    ];

    pub fn mode(self) -> u8 {
        match self {
            ClassicPhase::YawPitch => 3,
            ClassicPhase::Planar => 1,
            ClassicPhase::VerticalRoll => 2,
            ClassicPhase::Fingers => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Pilot {
    pub policy: AgentPolicy,
    phase: usize,
    carrying: bool,
    reopening: bool,
    rng: ChaCha8Rng,
    /// Ticks left before a press that has been decided on.
    delay: Option<u32>,
}

fn sat(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

impl Pilot {
    pub fn new(policy: AgentPolicy) -> Self {
        Pilot {
            rng: ChaCha8Rng::seed_from_u64(policy.seed),
            policy,
            phase: 0,
            carrying: false,
            reopening: false,
            delay: None,
        }
    }

    /// Forget the plan; call at the start of every trial.
    pub fn reset(&mut self) {
        self.phase = 0;
        self.carrying = false;
        self.reopening = false;
        self.delay = None;
    }

    /// The phase the Classic plan is currently executing.
    pub fn classic_phase(&self) -> ClassicPhase {
        ClassicPhase::PLAN[self.phase]
    }

    pub fn act(&mut self, task: &TaskEnv, env: &EnvState, controller: &ControllerState, w: &DofWeights) -> InputSample {
        if !env.is_running() {
            return InputSample::idle();
        }
        let input = match self.policy.kind {
            AgentKind::ClassicOracle => self.classic_oracle_step(task, env, controller),
            AgentKind::AdmcOracle => self.admc_oracle_step(task, env, controller, w),
        };
        self.humanize(input)
    }

    /// Applies the deflection scale and holds still for a random reaction
    /// time before each press.
    fn humanize(&mut self, input: InputSample) -> InputSample {
        if !input.button || self.policy.reaction_ticks == 0 {
            self.delay = None;
            let k = self.policy.deflection;
            return InputSample::new(input.axis1 * k, input.axis2 * k, input.button);
        }
        let max = self.policy.reaction_ticks;
        let left = *self.delay.get_or_insert_with(|| self.rng.random_range(0..=max));
        if left == 0 {
            self.delay = None;
            input
        } else {
            self.delay = Some(left - 1);
            InputSample::idle()
        }
    }

    /// Errors of each Classic phase's DoFs against the current target.
    fn phase_errors(&self, task: &TaskEnv, env: &EnvState) -> ([f64; 4], crate::suggest::Target) {
        let target = current_target(task, env).expect("running env");
        let g = &env.gripper;
        let e = rotation_error(&g.pose.orientation, &target.pose.orientation);
        let d = target.pose.position - g.pose.position;
        let finger_done = if g.holding { 0.0 } else { 1.0 };
        let finger_err = if self.carrying { 1.0 - finger_done } else { finger_done };
        (
            [e.y.abs().max(e.z.abs()), d.x.abs().max(d.y.abs()), d.z.abs().max(e.x.abs()), finger_err],
            target,
        )
    }

    fn phase_tolerance(&self, phase: usize) -> f64 {
        let c = &self.policy.classic;
        match ClassicPhase::PLAN[phase] {
            ClassicPhase::YawPitch => c.rot_tolerance,
            ClassicPhase::Planar => c.pos_tolerance,
            // Mixed metres and radians; the smaller tolerance governs both.
            ClassicPhase::VerticalRoll => c.pos_tolerance.min(c.rot_tolerance),
            ClassicPhase::Fingers => 0.5,
        }
    }

    /// Sequential plan: yaw/pitch, then X/Y, then Z and roll, then fingers.
    /// Settled phases are skipped; a phase whose error drifts back out is
    /// re-entered. The button is pressed only to reach the mode the current
    /// phase needs.
    pub fn classic_oracle_step(&mut self, task: &TaskEnv, env: &EnvState, controller: &ControllerState) -> InputSample {
        let c = self.policy.classic;
        if env.gripper.holding != self.carrying {
            self.carrying = env.gripper.holding;
            self.phase = 0;
            self.reopening = false;
        }
        let (errors, target) = self.phase_errors(task, env);
        if let Some(i) = (0..self.phase).find(|&i| errors[i] > c.reentry_factor * self.phase_tolerance(i)) {
            self.phase = i;
        }
        while self.phase < 3 && errors[self.phase] <= self.phase_tolerance(self.phase) {
            self.phase += 1;
        }

        let phase = ClassicPhase::PLAN[self.phase];
        if controller.classic_mode != phase.mode() {
            return InputSample::press();
        }
        let g = &env.gripper;
        let e = rotation_error(&g.pose.orientation, &target.pose.orientation);
        let d = target.pose.position - g.pose.position;
        match phase {
            ClassicPhase::YawPitch => InputSample::new(sat(e.z / c.rot_slowdown), sat(e.y / c.rot_slowdown), false),
            ClassicPhase::Planar => InputSample::new(sat(d.x / c.pos_slowdown), sat(d.y / c.pos_slowdown), false),
            ClassicPhase::VerticalRoll => {
                InputSample::new(sat(d.z / c.pos_slowdown), sat(e.x / c.rot_slowdown), false)
            }
            ClassicPhase::Fingers => {
                let scene = &task.scene;
                if g.holding {
                    InputSample::forward(1.0)
                } else {
                    if g.aperture <= scene.close_threshold {
                        self.reopening = true;
                    } else if g.aperture >= 0.95 {
                        self.reopening = false;
                    }
                    InputSample::forward(if self.reopening { 1.0 } else { -1.0 })
                }
            }
        }
    }

    /// Press to take a new suggestion, otherwise push the axis fully forward.
    ///
    /// Threshold: press as soon as a suggestion has been announced.
    /// Continuous: press when the optimal suggestion has drifted more than
    /// the acceptance dissimilarity away from the active direction.
    pub fn admc_oracle_step(
        &mut self,
        task: &TaskEnv,
        env: &EnvState,
        controller: &ControllerState,
        w: &DofWeights,
    ) -> InputSample {
        let active = &controller.admc.active_direction;
        if active.is_zero() {
            return InputSample::press();
        }
        let press = match controller.method {
            Method::Threshold => controller.admc.pending,
            _ => {
                let set = compute_suggestions(task, env, w, controller.tick).expect("running env");
                let optimal = set.optimal();
                optimal.applicable
                    && cosine_dissimilarity(active, &optimal.direction, w)
                        .is_ok_and(|d| d > self.policy.admc.accept_dissimilarity)
            }
        };
        if press {
            InputSample::press()
        } else {
            InputSample::forward(1.0)
        }
    }
}
