//! Task-specific script that ranks five movement options for the gripper.
//!
//! The script looks at the gripper pose and aperture relative to the current
//! sub-goal (grasp the cube, or set it down on the disc) and proposes, in
//! order of assumed usefulness:
//!
//! 1. `Optimal`: translation, rotation and finger motion combined.
//! 2. `Adjustment`: `Optimal` without the finger part.
//! 3. `Translation`: move towards the goal without rotating.
//! 4. `Rotation`: rotate towards the goal without moving.
//! 5. `Fingers`: open or close.
//!
//! Suggestions are recomputed every tick.

use crate::motion::{rotation_error, weighted_normalize, DofWeights, MotionVector7, Pose, Vec3};
use crate::task::{EnvState, TaskEnv};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw error below which a suggestion is considered already satisfied.
pub const RESOLUTION: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuggestError {
    #[error("suggestions are only defined while a trial is running")]
    InvalidPhase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeId {
    Optimal,
    Adjustment,
    Translation,
    Rotation,
    Fingers,
}

impl ModeId {
    /// Rank order.
    pub const ALL: [ModeId; 5] = [
        ModeId::Optimal,
        ModeId::Adjustment,
        ModeId::Translation,
        ModeId::Rotation,
        ModeId::Fingers,
    ];

    pub fn slot(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerIntent {
    Neutral,
    Open,
    Close,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target {
    pub pose: Pose,
    pub finger: FingerIntent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub mode: ModeId,
    /// Weighted-unit direction, or zero when not applicable.
    pub direction: MotionVector7,
    pub applicable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestionSet {
    pub tick: u64,
    pub suggestions: [Suggestion; 5],
}

impl SuggestionSet {
    pub fn get(&self, mode: ModeId) -> &Suggestion {
        &self.suggestions[mode.slot()]
    }

    pub fn optimal(&self) -> &Suggestion {
        self.get(ModeId::Optimal)
    }

    /// A set where nothing is applicable, used before the first trial starts.
    pub fn empty(tick: u64) -> Self {
        SuggestionSet {
            tick,
            suggestions: ModeId::ALL.map(|mode| Suggestion {
                mode,
                direction: MotionVector7::zero(),
                applicable: false,
            }),
        }
    }

    pub fn applicability(&self) -> [bool; 5] {
        self.suggestions.map(|s| s.applicable)
    }
}

/// Goal pose and finger intent for the current sub-task.
pub fn current_target(task: &TaskEnv, env: &EnvState) -> Result<Target, SuggestError> {
    if !env.is_running() {
        return Err(SuggestError::InvalidPhase);
    }
    let scene = &task.scene;
    let g = &env.gripper;
    if !g.holding {
        let orientation = scene.grasp_orientation(&env.object, &g.pose.orientation);
        let finger = if g.aperture <= scene.close_threshold {
            // Fingers closed on nothing: reopen before the next attempt.
            FingerIntent::Open
        } else if task.in_grasp_tolerance(env) {
            FingerIntent::Close
        } else {
            FingerIntent::Neutral
        };
        Ok(Target {
            pose: Pose::new(env.object.position, orientation),
            finger,
        })
    } else {
        // Move the gripper so the held cube comes to rest on the disc centre.
        let bottom_gap = scene.object_bottom(&env.object) - scene.table_height;
        let goal_center = Vec3::new(
            scene.target_center.x,
            scene.target_center.y,
            env.object.position.z - bottom_gap,
        );
        let position = g.pose.position + (goal_center - env.object.position);
        let finger = if (position - g.pose.position).norm() <= scene.grasp_pos_tolerance {
            FingerIntent::Open
        } else {
            FingerIntent::Neutral
        };
        Ok(Target {
            pose: Pose::new(position, g.pose.orientation),
            finger,
        })
    }
}

/// The raw, unnormalized error vector towards the target.
pub fn raw_error(env: &EnvState, target: &Target) -> MotionVector7 {
    let g = &env.gripper;
    let finger = match target.finger {
        FingerIntent::Neutral => 0.0,
        FingerIntent::Close => 0.0 - g.aperture,
        FingerIntent::Open => 1.0 - g.aperture,
    };
    MotionVector7::new(
        target.pose.position - g.pose.position,
        rotation_error(&g.pose.orientation, &target.pose.orientation),
        finger,
    )
}

fn make(mode: ModeId, raw: MotionVector7, w: &DofWeights) -> Suggestion {
    let size = raw.translation.norm_squared() + raw.rotation.norm_squared() + raw.finger * raw.finger;
    if size.sqrt() < RESOLUTION {
        return Suggestion {
            mode,
            direction: MotionVector7::zero(),
            applicable: false,
        };
    }
    Suggestion {
        mode,
        direction: weighted_normalize(&raw, w).unwrap_or_default(),
        applicable: true,
    }
}

pub fn compute_suggestions(
    task: &TaskEnv,
    env: &EnvState,
    w: &DofWeights,
    tick: u64,
) -> Result<SuggestionSet, SuggestError> {
    let target = current_target(task, env)?;
    let raw = raw_error(env, &target);
    let fingers = match target.finger {
        FingerIntent::Neutral => 0.0,
        FingerIntent::Close => -1.0,
        FingerIntent::Open => 1.0,
    };
    Ok(SuggestionSet {
        tick,
        suggestions: [
            make(ModeId::Optimal, raw, w),
            make(ModeId::Adjustment, raw.without_finger(), w),
            make(ModeId::Translation, MotionVector7::from_translation(raw.translation), w),
            make(ModeId::Rotation, MotionVector7::from_rotation(raw.rotation), w),
            make(ModeId::Fingers, MotionVector7::from_finger(fingers), w),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{cosine_dissimilarity, Orientation};
    use crate::task::tests::env as task_env;
    use crate::task::{TrialKind, TrialSpec};
    use approx::assert_abs_diff_eq;

    fn spawn(task: &TaskEnv, k: usize) -> EnvState {
        task.spawn_trial(TrialSpec {
            index: 0,
            spawn: k,
            kind: TrialKind::Measured,
        })
    }

    #[test]
    fn target_before_grasp_is_top_grasp_on_object() {
        let task = task_env();
        let s = spawn(&task, 1);
        let t = current_target(&task, &s).unwrap();
        assert_eq!(t.pose.position, s.object.position);
        let down = t.pose.orientation.rotate(&Vec3::x());
        assert_abs_diff_eq!(down, -Vec3::z(), epsilon = 1e-12);
        assert_eq!(t.finger, FingerIntent::Neutral);
    }

    #[test]
    fn target_while_holding_is_over_disc() {
        let task = task_env();
        let mut s = spawn(&task, 5);
        s.gripper.pose = Pose::new(s.object.position, task.scene.grasp_orientation(&s.object, &Orientation::identity()));
        while !s.gripper.holding {
            task.step(&mut s, &MotionVector7::from_finger(-1.0)).unwrap();
        }
        let t = current_target(&task, &s).unwrap();
        // The held cube is centred on the gripper here, so the target is directly over the disc.
        let c = task.scene.target_center;
        assert_abs_diff_eq!(t.pose.position.x, c.x, epsilon = 1e-12);
        assert_abs_diff_eq!(t.pose.position.y, c.y, epsilon = 1e-12);
    }

    #[test]
    fn inside_grasp_zone_intends_close() {
        let task = task_env();
        let mut s = spawn(&task, 0);
        s.gripper.pose = Pose::new(
            s.object.position + Vec3::new(0.0, 0.01, 0.01),
            task.scene.grasp_orientation(&s.object, &Orientation::identity()),
        );
        assert_eq!(current_target(&task, &s).unwrap().finger, FingerIntent::Close);
        let set = compute_suggestions(&task, &s, &DofWeights::default(), 0).unwrap();
        assert!(set.optimal().direction.finger < 0.0);
        let f = set.get(ModeId::Fingers);
        assert!(f.applicable);
        assert!(f.direction.translation == Vec3::zeros() && f.direction.finger < 0.0);
    }

    #[test]
    fn pure_vertical_offset() {
        let task = task_env();
        let mut s = spawn(&task, 0);
        let grasp = task.scene.grasp_orientation(&s.object, &Orientation::identity());
        s.gripper.pose = Pose::new(s.object.position + Vec3::new(0.0, 0.0, 0.3), grasp);
        let set = compute_suggestions(&task, &s, &DofWeights::default(), 0).unwrap();
        let down = MotionVector7::from_translation(-Vec3::z());
        assert_abs_diff_eq!(set.optimal().direction.translation, down.translation, epsilon = 1e-12);
        assert_abs_diff_eq!(set.get(ModeId::Translation).direction.translation, down.translation, epsilon = 1e-12);
        assert!(!set.get(ModeId::Rotation).applicable);
        assert!(set.get(ModeId::Rotation).direction.is_zero());
        assert!(!set.get(ModeId::Fingers).applicable);
    }

    #[test]
    fn translation_and_rotation_are_orthogonal_at_start() {
        let task = task_env();
        let w = DofWeights::default();
        for k in 0..8 {
            let s = spawn(&task, k);
            let set = compute_suggestions(&task, &s, &w, 0).unwrap();
            let t = set.get(ModeId::Translation);
            let r = set.get(ModeId::Rotation);
            assert!(t.applicable && r.applicable);
            assert_eq!(cosine_dissimilarity(&t.direction, &r.direction, &w).unwrap(), 50.0);
            assert_eq!(set.suggestions.map(|s| s.mode), ModeId::ALL);
        }
    }

    #[test]
    fn idle_env_is_rejected() {
        let task = task_env();
        let mut s = spawn(&task, 0);
        s.phase = crate::task::EnvPhase::Idle;
        assert_eq!(current_target(&task, &s), Err(SuggestError::InvalidPhase));
    }
}
