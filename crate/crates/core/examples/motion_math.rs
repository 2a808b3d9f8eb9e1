//! Pose algebra, rotation error, weighted dissimilarity and one integration step.

use admc_core::motion::{
    cosine_dissimilarity, integrate, rotation_error, weighted_normalize, DofWeights, MotionVector7, Orientation,
    Pose, SpeedLimits, Vec3,
};
use std::f64::consts::FRAC_PI_2;

fn main() {
    let w = DofWeights::default();

    let start = Pose::new(Vec3::new(0.45, 0.0, 1.05), Orientation::identity());
    let grasp = Orientation::from_scaled_axis(Vec3::new(0.0, FRAC_PI_2, 0.0));
    let e = rotation_error(&start.orientation, &grasp);
    println!("rotation error to a top grasp: {:.4?} (|e| = {:.4} rad)", e.as_slice(), e.norm());

    let towards = MotionVector7::new(Vec3::new(0.0, 0.25, -0.3), e, 0.0);
    let unit = weighted_normalize(&towards, &w).expect("non-zero vector");
    println!("weighted unit direction: {:.4?}", unit.to_array());
    println!("weighted norm after normalize: {:.12}", unit.weighted_norm(&w));

    let pure_x = MotionVector7::from_translation(Vec3::x());
    let pure_y = MotionVector7::from_translation(Vec3::y());
    for (name, other) in [("same", pure_x), ("orthogonal", pure_y), ("opposite", -pure_x)] {
        let d = cosine_dissimilarity(&pure_x, &other, &w).unwrap();
        println!("dissimilarity {name:>10}: {d:6.2} %");
    }

    let velocity = MotionVector7::new(Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.5), -2.0);
    let (next, aperture) = integrate(&start, 1.0, &velocity, 0.02, &SpeedLimits::default());
    println!(
        "after one 20 ms step: position {:.4?}, yaw {:.4} rad, aperture {:.3}",
        next.position.as_slice(),
        next.orientation.angle(),
        aperture
    );
}
