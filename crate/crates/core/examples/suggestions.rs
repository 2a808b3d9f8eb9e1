//! The five ranked suggestions for a freshly spawned trial, and how they
//! change once the gripper hovers over the cube.

use admc_core::motion::{cosine_dissimilarity, DofWeights, Orientation, Pose, SpeedLimits, Vec3};
use admc_core::suggest::{compute_suggestions, current_target, SuggestionSet};
use admc_core::task::{SceneConfig, TaskEnv, TrialKind, TrialSpec};

fn show(label: &str, set: &SuggestionSet, w: &DofWeights) {
    println!("{label}");
    let optimal = set.optimal().direction;
    for s in &set.suggestions {
        let vs_optimal = cosine_dissimilarity(&optimal, &s.direction, w)
            .map_or("-".to_string(), |d| format!("{d:5.1} %"));
        println!(
            "  {:<12} applicable={:<5} vs optimal {:>8}  {:+.3?}",
            format!("{:?}", s.mode),
            s.applicable,
            vs_optimal,
            s.direction.to_array()
        );
    }
}

fn main() {
    let task = TaskEnv::new(SceneConfig::default(), SpeedLimits::default(), TaskEnv::DEFAULT_DT).unwrap();
    let w = DofWeights::default();
    let mut env = task.spawn_trial(TrialSpec {
        index: 0,
        spawn: 1,
        kind: TrialKind::Measured,
    });
    let target = current_target(&task, &env).unwrap();
    println!("cube at {:.3?}, finger intent {:?}", env.object.position.as_slice(), target.finger);
    show("at the start pose:", &compute_suggestions(&task, &env, &w, 0).unwrap(), &w);

    let grasp = task.scene.grasp_orientation(&env.object, &Orientation::identity());
    env.gripper.pose = Pose::new(env.object.position + Vec3::new(0.0, 0.0, 0.02), grasp);
    show("aligned, 2 cm above the cube:", &compute_suggestions(&task, &env, &w, 1).unwrap(), &w);
}
