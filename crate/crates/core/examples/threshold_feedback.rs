//! Threshold method: accept the first suggestion, keep pushing forward, and
//! report each feedback episode together with the dissimilarity that caused it.

use admc_core::control::{FeedbackKind, InputSample, Method};
use admc_core::motion::cosine_dissimilarity;
use admc_core::session::{Session, SessionConfig};

fn main() {
    let mut session = Session::new(SessionConfig::new(Method::Threshold, 1)).unwrap();
    session.start();
    let w = session.config().sim.weights;
    let mut input = InputSample::press();
    let mut episodes = 0;
    while episodes < 3 {
        let before = session.suggestions().optimal().direction;
        let active = session.controller().admc.active_direction;
        let frame = session.step(input).unwrap();
        if frame.events.iter().any(|e| e.kind == FeedbackKind::Tone1kHz) {
            episodes += 1;
            let d = cosine_dissimilarity(&active, &before, &w).unwrap();
            let kinds: Vec<_> = frame.events.iter().map(|e| format!("{:?}", e.kind)).collect();
            println!("tick {:>4}: dissimilarity {d:5.1} % -> {}", frame.tick, kinds.join(", "));
            // Accept the announced suggestion on the next tick.
            input = InputSample::press();
        } else {
            input = InputSample::forward(1.0);
        }
        if frame.switch_count > 0 && input.button {
            println!("           switch #{} accepts it", frame.switch_count + 1);
        }
    }
}
