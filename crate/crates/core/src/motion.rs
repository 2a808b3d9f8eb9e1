//! Pose and motion-vector math for the combined 7-DoF space.
//!
//! A [`MotionVector7`] packs three translational components, a world-frame
//! axis-angle rotation rate and a scalar finger (aperture) rate. Directions
//! are compared in a weighted inner-product space configured by
//! [`DofWeights`], so metres, radians and aperture units can be traded off
//! against each other explicitly.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::ops::{Add, Mul, Neg, Sub};
use thiserror::Error;

/// Translation (metres) or axis-angle rotation (radians) in the world frame.
pub type Vec3 = Vector3<f64>;

/// Below this norm a direction is treated as exactly zero.
const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("direction is undefined for a zero-length vector")]
    UndefinedDirection,
}

/// Unit quaternion, scalar-first on the wire.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Orientation(UnitQuaternion<f64>);

impl Orientation {
    pub fn identity() -> Self {
        Orientation(UnitQuaternion::identity())
    }

    /// Builds an orientation from raw `(w, x, y, z)` components, renormalizing.
    pub fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Result<Self, MotionError> {
        let q = Quaternion::new(w, x, y, z);
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(MotionError::InvalidInput("non-finite quaternion"));
        }
        if q.norm() < ZERO_NORM {
            return Err(MotionError::InvalidInput("zero quaternion"));
        }
        Ok(Orientation(UnitQuaternion::new_normalize(q)))
    }

    /// Rotation by the axis-angle vector `v` (axis times angle in radians).
    pub fn from_scaled_axis(v: Vec3) -> Self {
        Orientation(UnitQuaternion::from_scaled_axis(v))
    }

    /// Rotation about world Z by `yaw` radians.
    pub fn from_yaw(yaw: f64) -> Self {
        Self::from_scaled_axis(Vec3::z() * yaw)
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn as_unit_quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.quaternion().norm()
    }

    pub fn inverse(&self) -> Self {
        Orientation(self.0.inverse())
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Orientation) -> Self {
        Orientation(UnitQuaternion::new_normalize((self.0 * other.0).into_inner()))
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Angle of the rotation, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        self.0.angle()
    }
}

impl Default for Orientation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Serialize for Orientation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.wxyz().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Orientation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [w, x, y, z] = <[f64; 4]>::deserialize(deserializer)?;
        // Keep the stored coefficients bit-exact so frame logs round-trip.
        let q = Quaternion::new(w, x, y, z);
        let off = (q.norm() - 1.0).abs();
        if off.is_nan() || off >= 1e-6 {
            return Err(serde::de::Error::custom("orientation is not a unit quaternion"));
        }
        Ok(Orientation(UnitQuaternion::new_unchecked(q)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Orientation,
}

impl Pose {
    pub fn new(position: Vec3, orientation: Orientation) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    /// `self ∘ other`, treating `other` as expressed in the frame of `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation.rotate(&other.position),
            orientation: self.orientation.compose(&other.orientation),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.inverse();
        Pose {
            position: -inv.rotate(&self.position),
            orientation: inv,
        }
    }
}

/// A velocity or direction in the combined 7-DoF space.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionVector7 {
    pub translation: Vec3,
    /// World-frame axis-angle rate.
    pub rotation: Vec3,
    /// Aperture rate, positive opens.
    pub finger: f64,
}

impl MotionVector7 {
    pub const fn new(translation: Vec3, rotation: Vec3, finger: f64) -> Self {
        MotionVector7 {
            translation,
            rotation,
            finger,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(translation, Vec3::zeros(), 0.0)
    }

    pub fn from_rotation(rotation: Vec3) -> Self {
        Self::new(Vec3::zeros(), rotation, 0.0)
    }

    pub fn from_finger(finger: f64) -> Self {
        Self::new(Vec3::zeros(), Vec3::zeros(), finger)
    }

    /// Components as `[tx, ty, tz, rx, ry, rz, f]`.
    pub fn to_array(&self) -> [f64; 7] {
        let t = &self.translation;
        let r = &self.rotation;
        [t.x, t.y, t.z, r.x, r.y, r.z, self.finger]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        Self::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]), a[6])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.to_array().iter().all(|&c| c == 0.0)
    }

    pub fn without_finger(&self) -> Self {
        Self::new(self.translation, self.rotation, 0.0)
    }

    pub fn weighted_dot(&self, other: &MotionVector7, w: &DofWeights) -> f64 {
        w.translation * w.translation * self.translation.dot(&other.translation)
            + w.rotation * w.rotation * self.rotation.dot(&other.rotation)
            + w.finger * w.finger * self.finger * other.finger
    }

    pub fn weighted_norm(&self, w: &DofWeights) -> f64 {
        self.weighted_dot(self, w).sqrt()
    }
}

impl Add for MotionVector7 {
    type Output = MotionVector7;
    fn add(self, rhs: Self) -> Self {
        Self::new(
            self.translation + rhs.translation,
            self.rotation + rhs.rotation,
            self.finger + rhs.finger,
        )
    }
}

impl Sub for MotionVector7 {
    type Output = MotionVector7;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for MotionVector7 {
    type Output = MotionVector7;
    fn neg(self) -> Self {
        Self::new(-self.translation, -self.rotation, -self.finger)
    }
}

impl Mul<f64> for MotionVector7 {
    type Output = MotionVector7;
    fn mul(self, s: f64) -> Self {
        Self::new(self.translation * s, self.rotation * s, self.finger * s)
    }
}

/// Per-group weights of the combined inner product.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DofWeights {
    pub translation: f64,
    pub rotation: f64,
    pub finger: f64,
}

impl DofWeights {
    pub fn new(translation: f64, rotation: f64, finger: f64) -> Result<Self, MotionError> {
        let w = DofWeights {
            translation,
            rotation,
            finger,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn uniform() -> Self {
        DofWeights {
            translation: 1.0,
            rotation: 1.0,
            finger: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        let ok = [self.translation, self.rotation, self.finger]
            .iter()
            .all(|w| w.is_finite() && *w > 0.0);
        if ok {
            Ok(())
        } else {
            Err(MotionError::InvalidInput("weights must be finite and positive"))
        }
    }
}

impl Default for DofWeights {
    fn default() -> Self {
        DofWeights {
            translation: 1.0,
            rotation: 0.5,
            finger: 0.25,
        }
    }
}

/// Per-group speed caps: m/s, rad/s and aperture/s.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedLimits {
    pub translation: f64,
    pub rotation: f64,
    pub finger: f64,
}

impl Default for SpeedLimits {
    fn default() -> Self {
        SpeedLimits {
            translation: 0.15,
            rotation: 0.9,
            finger: 1.0,
        }
    }
}

/// Scales `v` to unit weighted norm. The zero vector stays zero.
pub fn weighted_normalize(v: &MotionVector7, w: &DofWeights) -> Result<MotionVector7, MotionError> {
    if !v.is_finite() {
        return Err(MotionError::InvalidInput("non-finite motion vector"));
    }
    let n = v.weighted_norm(w);
    if n < ZERO_NORM {
        return Ok(MotionVector7::zero());
    }
    Ok(*v * (1.0 / n))
}

/// Cosines this close to ±1 are reported as exactly ±1.
pub const ENDPOINT_SNAP: f64 = 1e-12;

/// Cosine dissimilarity in percent: 0 for aligned, 100 for opposite.
pub fn cosine_dissimilarity(
    u: &MotionVector7,
    v: &MotionVector7,
    w: &DofWeights,
) -> Result<f64, MotionError> {
    if !u.is_finite() || !v.is_finite() {
        return Err(MotionError::InvalidInput("non-finite motion vector"));
    }
    let uu = u.weighted_dot(u, w);
    let vv = v.weighted_dot(v, w);
    if uu.sqrt() < ZERO_NORM || vv.sqrt() < ZERO_NORM {
        return Err(MotionError::UndefinedDirection);
    }
    let mut cos = (u.weighted_dot(v, w) / (uu * vv).sqrt()).clamp(-1.0, 1.0);
    // Parallel vectors land on the endpoints exactly despite rounding.
    if 1.0 - cos.abs() < ENDPOINT_SNAP {
        cos = cos.signum();
    }
    Ok(50.0 * (1.0 - cos))
}

/// Axis-angle vector of the world-frame rotation taking `current` to `target`.
///
/// The angle lies in `[0, π]`. At exactly π the axis sign is ambiguous and the
/// lexicographically larger of `±axis` is returned.
pub fn rotation_error(current: &Orientation, target: &Orientation) -> Vec3 {
    let rel = target.0 * current.0.inverse();
    let q = rel.quaternion();
    let (mut w, mut v) = (q.w, q.imag());
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let s = v.norm();
    if s < ZERO_NORM {
        return Vec3::zeros();
    }
    let angle = 2.0 * s.atan2(w);
    let mut axis = v / s;
    if w <= 1e-12 && lexicographic_less(&axis, &-axis) {
        axis = -axis;
    }
    axis * angle
}

fn lexicographic_less(a: &Vec3, b: &Vec3) -> bool {
    for i in 0..3 {
        if a[i] != b[i] {
            return a[i] < b[i];
        }
    }
    false
}

fn clamp_norm(v: Vec3, cap: f64) -> Vec3 {
    let n = v.norm();
    if n > cap {
        v * (cap / n)
    } else {
        v
    }
}

/// Advances a pose and finger aperture by one fixed step.
///
/// Translation and rotation rates are clamped to their norm caps, the finger
/// rate to its absolute cap; aperture saturates in `[0, 1]`.
pub fn integrate(
    pose: &Pose,
    aperture: f64,
    v: &MotionVector7,
    dt: f64,
    limits: &SpeedLimits,
) -> (Pose, f64) {
    debug_assert!(dt > 0.0);
    let t = clamp_norm(v.translation, limits.translation);
    let r = clamp_norm(v.rotation, limits.rotation);
    let f = v.finger.clamp(-limits.finger, limits.finger);

    let position = pose.position + t * dt;
    let orientation = if r == Vec3::zeros() {
        pose.orientation
    } else {
        Orientation::from_scaled_axis(r * dt).compose(&pose.orientation)
    };
    let aperture = if f == 0.0 {
        aperture
    } else {
        (aperture + f * dt).clamp(0.0, 1.0)
    };
    (Pose::new(position, orientation), aperture)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn uniform() -> DofWeights {
        DofWeights::uniform()
    }

    #[test]
    fn normalize_examples() {
        let v = MotionVector7::from_translation(Vec3::new(2.0, 0.0, 0.0));
        let n = weighted_normalize(&v, &uniform()).unwrap();
        assert_eq!(n.translation, Vec3::new(1.0, 0.0, 0.0));

        let z = weighted_normalize(&MotionVector7::zero(), &uniform()).unwrap();
        assert!(z.is_zero());

        let v = MotionVector7::new(Vec3::new(1.0, 0.0, 0.0), Vec3::zeros(), 1.0);
        let n = weighted_normalize(&v, &uniform()).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert_abs_diff_eq!(n.translation.x, h, epsilon = 1e-15);
        assert_abs_diff_eq!(n.finger, h, epsilon = 1e-15);
    }

    #[test]
    fn normalize_rejects_nan() {
        let v = MotionVector7::from_finger(f64::NAN);
        assert!(matches!(
            weighted_normalize(&v, &uniform()),
            Err(MotionError::InvalidInput(_))
        ));
    }

    #[test]
    fn dissimilarity_endpoints_and_orthogonal() {
        let w = DofWeights::default();
        let u = MotionVector7::new(Vec3::new(0.3, -0.1, 0.2), Vec3::new(0.0, 1.0, 0.4), -0.7);
        assert_eq!(cosine_dissimilarity(&u, &u, &w).unwrap(), 0.0);
        assert_eq!(cosine_dissimilarity(&u, &-u, &w).unwrap(), 100.0);
        let a = MotionVector7::from_translation(Vec3::x());
        let b = MotionVector7::from_rotation(Vec3::z());
        assert_eq!(cosine_dissimilarity(&a, &b, &w).unwrap(), 50.0);
    }

    #[test]
    fn dissimilarity_of_zero_is_undefined() {
        let a = MotionVector7::from_translation(Vec3::x());
        assert_eq!(
            cosine_dissimilarity(&a, &MotionVector7::zero(), &uniform()),
            Err(MotionError::UndefinedDirection)
        );
    }

    #[test]
    fn rotation_error_examples() {
        let q = Orientation::from_yaw(0.3);
        assert_eq!(rotation_error(&q, &q), Vec3::zeros());

        let e = rotation_error(&Orientation::identity(), &Orientation::from_yaw(FRAC_PI_2));
        assert_abs_diff_eq!(e, Vec3::new(0.0, 0.0, FRAC_PI_2), epsilon = 1e-12);
    }

    /// Both quaternion signs of a half turn about X must map to the same
    /// error vector, `+π X`.
    #[test]
    fn half_turn_tie_breaks_to_positive_axis() {
        let plus = Orientation::from_wxyz(0.0, 1.0, 0.0, 0.0).unwrap();
        let minus = Orientation(UnitQuaternion::new_unchecked(Quaternion::new(0.0, -1.0, 0.0, 0.0)));
        for target in [plus, minus] {
            let e = rotation_error(&Orientation::identity(), &target);
            assert_abs_diff_eq!(e, Vec3::new(PI, 0.0, 0.0), epsilon = 1e-12);
        }
        // Rotation-matrix route: R = diag(1, -1, -1), angle = acos((tr R - 1) / 2).
        let m = plus.as_unit_quaternion().to_rotation_matrix();
        let angle = ((m.matrix().trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        assert_abs_diff_eq!(angle, PI, epsilon = 1e-12);
    }

    #[test]
    fn integrate_examples() {
        let limits = SpeedLimits::default();
        let pose = Pose::new(Vec3::new(0.1, 0.2, 0.9), Orientation::from_yaw(0.4));
        let (p, a) = integrate(&pose, 0.5, &MotionVector7::zero(), 0.02, &limits);
        assert_eq!(p, pose);
        assert_eq!(a, 0.5);

        let v = MotionVector7::from_translation(Vec3::new(0.1, 0.0, 0.0));
        let (p, _) = integrate(&Pose::default(), 1.0, &v, 0.02, &limits);
        assert_abs_diff_eq!(p.position.x, 0.002, epsilon = 1e-15);

        let (half, _) = integrate(&pose, 1.0, &v, 0.01, &limits);
        let (half, _) = integrate(&half, 1.0, &v, 0.01, &limits);
        let (full, _) = integrate(&pose, 1.0, &v, 0.02, &limits);
        assert_abs_diff_eq!(half.position, full.position, epsilon = 1e-15);
    }

    #[test]
    fn integrate_clamps_speed_and_aperture() {
        let limits = SpeedLimits::default();
        let v = MotionVector7::new(Vec3::new(3.0, 4.0, 0.0), Vec3::zeros(), 5.0);
        let (p, a) = integrate(&Pose::default(), 0.99, &v, 0.02, &limits);
        assert_abs_diff_eq!(p.position.norm(), 0.15 * 0.02, epsilon = 1e-15);
        assert_eq!(a, 1.0);
    }

    #[test]
    fn pose_inverse_roundtrip() {
        let p = Pose::new(Vec3::new(0.3, -0.2, 1.0), Orientation::from_scaled_axis(Vec3::new(0.2, 0.5, -1.0)));
        let id = p.compose(&p.inverse());
        assert_abs_diff_eq!(id.position, Vec3::zeros(), epsilon = 1e-12);
        assert!(id.orientation.angle() < 1e-12);
    }
}
