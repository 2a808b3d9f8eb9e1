//! Record a session as a JSONL frame log, then replay its inputs and check
//! that the reproduced log is byte-identical.

use admc_core::control::Method;
use admc_core::pilot::{AgentKind, AgentPolicy};
use admc_core::session::{read_frames, replay, run_session, write_frame, AgentSource, Session, SessionConfig};

fn main() {
    let cfg = SessionConfig {
        training_repeats: 0,
        measured_repeats: 1,
        ..SessionConfig::new(Method::Continuous, 9)
    };
    let sim = cfg.sim.clone();
    let mut session = Session::new(cfg).unwrap();
    let mut pilot = AgentSource::new(AgentPolicy::new(AgentKind::AdmcOracle));
    let mut recorded = Vec::new();
    let log = run_session(&mut session, &mut pilot, Some(&mut recorded)).unwrap();
    println!("recorded {} ticks, {} measured trials", session.tick(), log.measured.len());

    let frames = read_frames(&recorded[..]).unwrap();
    let again = replay(&frames, &sim).unwrap();
    let mut reproduced = Vec::new();
    for f in &again {
        write_frame(&mut reproduced, f).unwrap();
    }
    println!("frames: {} recorded, {} replayed", frames.len(), again.len());
    println!("byte-identical: {}", recorded == reproduced);
}
