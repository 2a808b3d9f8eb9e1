//! The four Classic modes: which axis drives which degree of freedom.

use admc_core::control::{classic_map, ControllerState, InputSample, Method, CLASSIC_MODES};
use admc_core::motion::SpeedLimits;

const NAMES: [&str; 7] = ["x", "y", "z", "roll", "pitch", "yaw", "fingers"];

fn main() {
    let limits = SpeedLimits::default();
    let mut state = ControllerState::new(Method::Classic);
    for mode in 1..=CLASSIC_MODES {
        state.classic_mode = mode;
        let mut row = Vec::new();
        for (axis, input) in [(1, InputSample::new(1.0, 0.0, false)), (2, InputSample::new(0.0, 1.0, false))] {
            let v = classic_map(&state, &input, &limits).to_array();
            let dof = v.iter().position(|c| *c != 0.0).map_or("-", |i| NAMES[i]);
            row.push(format!("axis{axis} -> {dof:<7}"));
        }
        println!("mode {mode}: {}", row.join("  "));
    }
}
