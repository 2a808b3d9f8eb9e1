//! Pick-and-place trial environment.
//!
//! A blue cube spawns at one of eight evenly spaced positions on a ring around
//! a red target disc. The gripper has to pick it up and set it down on the
//! disc; on success the cube disappears and the gripper returns to its start
//! pose on its own, after which the environment goes idle.

use crate::motion::{integrate, rotation_error, Orientation, Pose, SpeedLimits, Vec3};
use crate::motion::MotionVector7;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

pub const SPAWN_POSITIONS: usize = 8;
pub const TRAINING_REPEATS: usize = 1;
pub const MEASURED_REPEATS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaskError {
    #[error("cannot step an idle environment")]
    InvalidPhase,
    #[error("invalid scene configuration: {0}")]
    InvalidScene(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub table_height: f64,
    /// Centre of the target disc; lies on the table surface.
    pub target_center: Vec3,
    pub target_radius: f64,
    pub ring_radius: f64,
    pub start_pose: Pose,
    pub grasp_pos_tolerance: f64,
    pub grasp_rot_tolerance: f64,
    pub object_size: f64,
    /// Yaw of the cube at spawn k is `2πk/8 + object_yaw_offset`.
    pub object_yaw_offset: f64,
    pub close_threshold: f64,
    pub release_threshold: f64,
    /// Max gap between the cube bottom and the surface for a valid place.
    pub drop_tolerance: f64,
    pub return_speed: f64,
    pub return_rot_speed: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            table_height: 0.75,
            target_center: Vec3::new(0.45, 0.0, 0.75),
            target_radius: 0.08,
            ring_radius: 0.25,
            // Tool approach axis is local +X, so identity points straight ahead.
            start_pose: Pose::new(Vec3::new(0.45, 0.0, 1.05), Orientation::identity()),
            grasp_pos_tolerance: 0.03,
            grasp_rot_tolerance: 15f64.to_radians(),
            object_size: 0.05,
            object_yaw_offset: PI / 12.0,
            close_threshold: 0.35,
            release_threshold: 0.6,
            drop_tolerance: 0.02,
            return_speed: 0.3,
            return_rot_speed: 1.8,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), TaskError> {
        let bad = |m: &str| Err(TaskError::InvalidScene(m.to_string()));
        let positive = [
            self.target_radius,
            self.ring_radius,
            self.grasp_pos_tolerance,
            self.grasp_rot_tolerance,
            self.object_size,
            self.drop_tolerance,
            self.return_speed,
            self.return_rot_speed,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("radii, tolerances, sizes and speeds must be positive");
        }
        if (self.target_center.z - self.table_height).abs() > 1e-9 {
            return bad("target centre must lie on the table surface");
        }
        if self.start_pose.position.z <= self.table_height {
            return bad("start pose must be above the table");
        }
        if !(0.0 < self.close_threshold
            && self.close_threshold < self.release_threshold
            && self.release_threshold < 1.0)
        {
            return bad("need 0 < close_threshold < release_threshold < 1");
        }
        Ok(())
    }

    /// Resting pose of the cube at spawn position `k`.
    pub fn spawn_pose(&self, k: usize) -> Pose {
        let angle = 2.0 * PI * k as f64 / SPAWN_POSITIONS as f64;
        let position = self.target_center
            + Vec3::new(angle.cos(), angle.sin(), 0.0) * self.ring_radius
            + Vec3::new(0.0, 0.0, self.object_size / 2.0);
        Pose::new(position, Orientation::from_yaw(angle + self.object_yaw_offset))
    }

    /// Height of the cube's lowest corner for a given pose.
    pub fn object_bottom(&self, pose: &Pose) -> f64 {
        let m = pose.orientation.as_unit_quaternion().to_rotation_matrix();
        let r = m.matrix();
        let half = self.object_size / 2.0;
        pose.position.z - half * (r[(2, 0)].abs() + r[(2, 1)].abs() + r[(2, 2)].abs())
    }

    /// The top-grasp orientation closest to `current` among the four that the
    /// cube's yaw symmetry allows.
    pub fn grasp_orientation(&self, object: &Pose, current: &Orientation) -> Orientation {
        let yaw = yaw_of(&object.orientation);
        let mut best = top_grasp(yaw);
        let mut best_err = rotation_error(current, &best).norm();
        for m in 1..4 {
            let cand = top_grasp(yaw + m as f64 * FRAC_PI_2);
            let err = rotation_error(current, &cand).norm();
            if err < best_err {
                best = cand;
                best_err = err;
            }
        }
        best
    }
}

/// Gripper pointing straight down with its finger plane at `yaw`.
pub fn top_grasp(yaw: f64) -> Orientation {
    Orientation::from_yaw(yaw).compose(&Orientation::from_scaled_axis(Vec3::y() * FRAC_PI_2))
}

fn yaw_of(o: &Orientation) -> f64 {
    let x = o.rotate(&Vec3::x());
    x.y.atan2(x.x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    Training,
    Measured,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub index: usize,
    pub spawn: usize,
    pub kind: TrialKind,
}

/// Eight training trials (each spawn once) followed by 24 measured trials
/// (each spawn three times), each block shuffled with a seeded PRNG.
pub fn make_schedule(seed: u64) -> Vec<TrialSpec> {
    make_schedule_with(seed, TRAINING_REPEATS, MEASURED_REPEATS)
}

/// Like [`make_schedule`] with a custom number of visits per spawn position.
pub fn make_schedule_with(seed: u64, training_repeats: usize, measured_repeats: usize) -> Vec<TrialSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut block = |repeats: usize| {
        let mut spawns: Vec<usize> = (0..SPAWN_POSITIONS)
            .flat_map(|k| std::iter::repeat_n(k, repeats))
            .collect();
        spawns.shuffle(&mut rng);
        spawns
    };
    let training = block(training_repeats);
    let measured = block(measured_repeats);
    training
        .into_iter()
        .map(|s| (s, TrialKind::Training))
        .chain(measured.into_iter().map(|s| (s, TrialKind::Measured)))
        .enumerate()
        .map(|(index, (spawn, kind))| TrialSpec { index, spawn, kind })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub pose: Pose,
    /// 1 is fully open.
    pub aperture: f64,
    pub holding: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectStatus {
    OnTable,
    Held,
    Placed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvPhase {
    Running,
    AutoReturning,
    Idle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrialEvent {
    Started,
    Grasped,
    Released { placed: bool },
    Completed { time_s: f64 },
    ReturnedHome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub spec: TrialSpec,
    pub gripper: GripperState,
    pub object: Pose,
    pub object_status: ObjectStatus,
    pub phase: EnvPhase,
    running_steps: u64,
    dt: f64,
    /// Cube pose in the gripper frame while held.
    grasp_offset: Option<Pose>,
    started: bool,
    completion_time: Option<f64>,
}

impl EnvState {
    /// Seconds spent in the running phase.
    pub fn clock(&self) -> f64 {
        self.running_steps as f64 * self.dt
    }

    pub fn running_steps(&self) -> u64 {
        self.running_steps
    }

    pub fn completion_time(&self) -> Option<f64> {
        self.completion_time
    }

    pub fn is_running(&self) -> bool {
        self.phase == EnvPhase::Running
    }
}

/// Scene, speed caps and fixed step shared by every trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskEnv {
    pub scene: SceneConfig,
    pub limits: SpeedLimits,
    pub dt: f64,
}

impl TaskEnv {
    pub const DEFAULT_DT: f64 = 0.02;

    pub fn new(scene: SceneConfig, limits: SpeedLimits, dt: f64) -> Result<Self, TaskError> {
        scene.validate()?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(TaskError::InvalidScene("dt must be positive".into()));
        }
        Ok(TaskEnv { scene, limits, dt })
    }

    pub fn spawn_trial(&self, spec: TrialSpec) -> EnvState {
        EnvState {
            spec,
            gripper: GripperState {
                pose: self.scene.start_pose,
                aperture: 1.0,
                holding: false,
            },
            object: self.scene.spawn_pose(spec.spawn % SPAWN_POSITIONS),
            object_status: ObjectStatus::OnTable,
            phase: EnvPhase::Running,
            running_steps: 0,
            dt: self.dt,
            grasp_offset: None,
            started: false,
            completion_time: None,
        }
    }

    /// True when the gripper is positioned and oriented well enough to grasp.
    pub fn in_grasp_tolerance(&self, state: &EnvState) -> bool {
        let g = &state.gripper.pose;
        let target = self.scene.grasp_orientation(&state.object, &g.orientation);
        (g.position - state.object.position).norm() <= self.scene.grasp_pos_tolerance
            && rotation_error(&g.orientation, &target).norm() < self.scene.grasp_rot_tolerance
    }

    pub fn step(
        &self,
        state: &mut EnvState,
        motion: &MotionVector7,
    ) -> Result<Vec<TrialEvent>, TaskError> {
        match state.phase {
            EnvPhase::Idle => Err(TaskError::InvalidPhase),
            EnvPhase::Running => Ok(self.step_running(state, motion)),
            EnvPhase::AutoReturning => Ok(self.step_returning(state)),
        }
    }

    fn step_running(&self, state: &mut EnvState, motion: &MotionVector7) -> Vec<TrialEvent> {
        let scene = &self.scene;
        let mut events = Vec::new();
        if !state.started {
            state.started = true;
            events.push(TrialEvent::Started);
        }

        let prev_aperture = state.gripper.aperture;
        let (mut pose, aperture) =
            integrate(&state.gripper.pose, prev_aperture, motion, self.dt, &self.limits);
        pose.position.z = pose.position.z.max(scene.table_height);
        if let Some(offset) = state.grasp_offset {
            let object = pose.compose(&offset);
            let sink = scene.table_height - scene.object_bottom(&object);
            if sink > 0.0 {
                pose.position.z += sink;
            }
            state.object = pose.compose(&offset);
        }
        state.gripper.pose = pose;
        state.gripper.aperture = aperture;
        state.running_steps += 1;

        let closed_now = prev_aperture > scene.close_threshold && aperture <= scene.close_threshold;
        let opened_now =
            prev_aperture < scene.release_threshold && aperture >= scene.release_threshold;

        if !state.gripper.holding
            && state.object_status == ObjectStatus::OnTable
            && closed_now
            && self.in_grasp_tolerance(state)
        {
            state.gripper.holding = true;
            state.object_status = ObjectStatus::Held;
            state.grasp_offset = Some(state.gripper.pose.inverse().compose(&state.object));
            events.push(TrialEvent::Grasped);
        } else if state.gripper.holding && opened_now {
            state.gripper.holding = false;
            state.grasp_offset = None;
            let offset = state.object.position - scene.target_center;
            let horizontal = (offset.x * offset.x + offset.y * offset.y).sqrt();
            let gap = scene.object_bottom(&state.object) - scene.table_height;
            let placed = horizontal <= scene.target_radius && gap <= scene.drop_tolerance;
            events.push(TrialEvent::Released { placed });
            if placed {
                state.object_status = ObjectStatus::Placed;
                let t = state.clock();
                state.completion_time = Some(t);
                state.phase = EnvPhase::AutoReturning;
                events.push(TrialEvent::Completed { time_s: t });
            } else {
                // Missed the disc: the cube drops back onto the table.
                state.object_status = ObjectStatus::OnTable;
                state.object.position.z -= scene.object_bottom(&state.object) - scene.table_height;
            }
        }
        events
    }

    fn step_returning(&self, state: &mut EnvState) -> Vec<TrialEvent> {
        let scene = &self.scene;
        let start = scene.start_pose;
        let g = &mut state.gripper;

        let delta = start.position - g.pose.position;
        let max_step = scene.return_speed * self.dt;
        g.pose.position = if delta.norm() <= max_step {
            start.position
        } else {
            g.pose.position + delta * (max_step / delta.norm())
        };

        let err = rotation_error(&g.pose.orientation, &start.orientation);
        let max_rot = scene.return_rot_speed * self.dt;
        g.pose.orientation = if err.norm() <= max_rot {
            start.orientation
        } else {
            Orientation::from_scaled_axis(err * (max_rot / err.norm())).compose(&g.pose.orientation)
        };
        g.aperture = (g.aperture + self.limits.finger * self.dt).min(1.0);

        if g.pose == start && g.aperture == 1.0 {
            state.phase = EnvPhase::Idle;
            vec![TrialEvent::ReturnedHome]
        } else {
            Vec::new()
        }
    }
}
