//! Flat key-value configuration file shared by the scene, the controllers and
//! the session loop. Every key carries its SI unit in the name; missing keys
//! fall back to defaults and unknown keys are rejected.

use crate::control::{ControlConfig, ThresholdConfig};
use crate::motion::{DofWeights, Orientation, Pose, SpeedLimits, Vec3};
use crate::task::SceneConfig;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

/// Environment variable that overrides the config path.
pub const CONFIG_ENV: &str = "ADMC_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub scene: SceneConfig,
    pub limits: SpeedLimits,
    pub weights: DofWeights,
    pub threshold: ThresholdConfig,
    pub tick_rate_hz: f64,
    pub trial_time_cap_s: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scene: SceneConfig::default(),
            limits: SpeedLimits::default(),
            weights: DofWeights::default(),
            threshold: ThresholdConfig::default(),
            tick_rate_hz: 50.0,
            trial_time_cap_s: 120.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlatConfig {
    table_height_m: f64,
    target_x_m: f64,
    target_y_m: f64,
    target_radius_m: f64,
    ring_radius_m: f64,
    start_x_m: f64,
    start_y_m: f64,
    start_z_m: f64,
    start_qw: f64,
    start_qx: f64,
    start_qy: f64,
    start_qz: f64,
    grasp_pos_tolerance_m: f64,
    grasp_rot_tolerance_rad: f64,
    object_size_m: f64,
    object_yaw_offset_rad: f64,
    close_threshold: f64,
    release_threshold: f64,
    drop_tolerance_m: f64,
    return_speed_m_s: f64,
    return_rot_speed_rad_s: f64,
    max_translation_speed_m_s: f64,
    max_rotation_speed_rad_s: f64,
    max_finger_speed_per_s: f64,
    weight_translation: f64,
    weight_rotation: f64,
    weight_finger: f64,
    threshold_pct: f64,
    threshold_debounce_ticks: u64,
    tick_rate_hz: f64,
    trial_time_cap_s: f64,
}

const KEY_DOCS: &[(&str, &str)] = &[
    ("table_height_m", "Height of the table surface."),
    ("target_x_m", "Target disc centre, world X."),
    ("target_y_m", "Target disc centre, world Y."),
    ("target_radius_m", "Target disc radius; the cube centre must land inside it."),
    ("ring_radius_m", "Radius of the ring of eight spawn positions around the target."),
    ("start_x_m", "Gripper start position, world X."),
    ("start_y_m", "Gripper start position, world Y."),
    ("start_z_m", "Gripper start position, world Z."),
    ("start_qw", "Gripper start orientation quaternion, scalar part."),
    ("start_qx", "Gripper start orientation quaternion, x."),
    ("start_qy", "Gripper start orientation quaternion, y."),
    ("start_qz", "Gripper start orientation quaternion, z."),
    ("grasp_pos_tolerance_m", "Max gripper-to-cube distance for a grasp."),
    ("grasp_rot_tolerance_rad", "Max orientation error for a grasp."),
    ("object_size_m", "Cube edge length."),
    ("object_yaw_offset_rad", "Yaw added to every spawned cube."),
    ("close_threshold", "Aperture at or below which closing fingers grasp (0..1)."),
    ("release_threshold", "Aperture at or above which opening fingers release (0..1)."),
    ("drop_tolerance_m", "Max gap between cube bottom and table for a valid place."),
    ("return_speed_m_s", "Automatic return speed."),
    ("return_rot_speed_rad_s", "Automatic return rotation speed."),
    ("max_translation_speed_m_s", "Translation speed cap."),
    ("max_rotation_speed_rad_s", "Rotation speed cap."),
    ("max_finger_speed_per_s", "Finger aperture rate cap."),
    ("weight_translation", "Translation weight in the direction inner product."),
    ("weight_rotation", "Rotation weight in the direction inner product."),
    ("weight_finger", "Finger weight in the direction inner product."),
    ("threshold_pct", "Threshold method: cosine dissimilarity (percent) that triggers a suggestion."),
    ("threshold_debounce_ticks", "Threshold method: minimum ticks between two feedback episodes."),
    ("tick_rate_hz", "Simulation rate; the fixed step is 1 / tick_rate_hz."),
    ("trial_time_cap_s", "Simulated seconds after which a trial is abandoned."),
];

impl Default for FlatConfig {
    fn default() -> Self {
        FlatConfig::from(&SimConfig::default())
    }
}

impl From<&SimConfig> for FlatConfig {
    fn from(c: &SimConfig) -> Self {
        let s = &c.scene;
        let [qw, qx, qy, qz] = s.start_pose.orientation.wxyz();
        FlatConfig {
            table_height_m: s.table_height,
            target_x_m: s.target_center.x,
            target_y_m: s.target_center.y,
            target_radius_m: s.target_radius,
            ring_radius_m: s.ring_radius,
            start_x_m: s.start_pose.position.x,
            start_y_m: s.start_pose.position.y,
            start_z_m: s.start_pose.position.z,
            start_qw: qw,
            start_qx: qx,
            start_qy: qy,
            start_qz: qz,
            grasp_pos_tolerance_m: s.grasp_pos_tolerance,
            grasp_rot_tolerance_rad: s.grasp_rot_tolerance,
            object_size_m: s.object_size,
            object_yaw_offset_rad: s.object_yaw_offset,
            close_threshold: s.close_threshold,
            release_threshold: s.release_threshold,
            drop_tolerance_m: s.drop_tolerance,
            return_speed_m_s: s.return_speed,
            return_rot_speed_rad_s: s.return_rot_speed,
            max_translation_speed_m_s: c.limits.translation,
            max_rotation_speed_rad_s: c.limits.rotation,
            max_finger_speed_per_s: c.limits.finger,
            weight_translation: c.weights.translation,
            weight_rotation: c.weights.rotation,
            weight_finger: c.weights.finger,
            threshold_pct: c.threshold.threshold_pct,
            threshold_debounce_ticks: c.threshold.debounce_ticks,
            tick_rate_hz: c.tick_rate_hz,
            trial_time_cap_s: c.trial_time_cap_s,
        }
    }
}

impl TryFrom<FlatConfig> for SimConfig {
    type Error = ConfigError;

    fn try_from(f: FlatConfig) -> Result<Self, ConfigError> {
        let orientation = Orientation::from_wxyz(f.start_qw, f.start_qx, f.start_qy, f.start_qz)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let cfg = SimConfig {
            scene: SceneConfig {
                table_height: f.table_height_m,
                target_center: Vec3::new(f.target_x_m, f.target_y_m, f.table_height_m),
                target_radius: f.target_radius_m,
                ring_radius: f.ring_radius_m,
                start_pose: Pose::new(Vec3::new(f.start_x_m, f.start_y_m, f.start_z_m), orientation),
                grasp_pos_tolerance: f.grasp_pos_tolerance_m,
                grasp_rot_tolerance: f.grasp_rot_tolerance_rad,
                object_size: f.object_size_m,
                object_yaw_offset: f.object_yaw_offset_rad,
                close_threshold: f.close_threshold,
                release_threshold: f.release_threshold,
                drop_tolerance: f.drop_tolerance_m,
                return_speed: f.return_speed_m_s,
                return_rot_speed: f.return_rot_speed_rad_s,
            },
            limits: SpeedLimits {
                translation: f.max_translation_speed_m_s,
                rotation: f.max_rotation_speed_rad_s,
                finger: f.max_finger_speed_per_s,
            },
            weights: DofWeights {
                translation: f.weight_translation,
                rotation: f.weight_rotation,
                finger: f.weight_finger,
            },
            threshold: ThresholdConfig {
                threshold_pct: f.threshold_pct,
                debounce_ticks: f.threshold_debounce_ticks,
            },
            tick_rate_hz: f.tick_rate_hz,
            trial_time_cap_s: f.trial_time_cap_s,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        self.scene.validate().map_err(|e| invalid(e.to_string()))?;
        self.weights.validate().map_err(|e| invalid(e.to_string()))?;
        self.threshold.validate().map_err(invalid)?;
        let l = &self.limits;
        if ![l.translation, l.rotation, l.finger].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(invalid("speed caps must be positive".into()));
        }
        if !(self.tick_rate_hz.is_finite() && self.tick_rate_hz > 0.0) {
            return Err(invalid("tick_rate_hz must be positive".into()));
        }
        if !(self.trial_time_cap_s.is_finite() && self.trial_time_cap_s > 0.0) {
            return Err(invalid("trial_time_cap_s must be positive".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_rate_hz
    }

    pub fn control(&self) -> ControlConfig {
        ControlConfig {
            limits: self.limits,
            weights: self.weights,
            threshold: self.threshold,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let flat: FlatConfig = toml::from_str(text)?;
        SimConfig::try_from(flat)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Documented file, one commented key per entry.
    pub fn to_toml_string(&self) -> String {
        let table = toml::Table::try_from(FlatConfig::from(self)).expect("flat config serializes");
        let mut out = String::from("# Teleoperation simulator configuration. SI units throughout.\n");
        for (key, doc) in KEY_DOCS {
            let _ = writeln!(out, "\n# {doc}\n{key} = {}", table[*key]);
        }
        out
    }
}
