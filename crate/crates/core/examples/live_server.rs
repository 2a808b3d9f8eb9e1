//! Start the WebSocket endpoint on a free port, drive it with a scripted
//! client for half a second, and print what comes back.

use admc_core::control::Method;
use admc_core::server::{serve, ServeOptions};
use admc_core::session::{Outbound, SessionConfig};
use std::time::{Duration, Instant};
use tungstenite::{connect, Message};

fn main() {
    let opts = ServeOptions::new(SessionConfig::new(Method::Threshold, 5));
    let server = serve("127.0.0.1:0", opts).expect("bind");
    let url = format!("ws://{}", server.local_addr());
    println!("server at {url}");

    let (mut ws, _) = connect(&url).expect("connect");
    let read = |ws: &mut tungstenite::WebSocket<_>| -> Outbound {
        match ws.read().expect("read") {
            Message::Text(t) => serde_json::from_str(t.as_str()).expect("outbound json"),
            other => panic!("unexpected {other:?}"),
        }
    };
    if let Outbound::Frame(f) = read(&mut ws) {
        println!("first frame: tick {}, status {:?}", f.tick, f.status);
    }

    ws.send(Message::text(r#"{"control":"start"}"#)).unwrap();
    ws.send(Message::text(r#"{"axis1":0,"axis2":0,"button":true}"#)).unwrap();
    ws.send(Message::text(r#"{"axis1":1.0,"axis2":0}"#)).unwrap();
    ws.send(Message::text("not json")).unwrap();

    let until = Instant::now() + Duration::from_millis(500);
    let mut last = None;
    while Instant::now() < until {
        match read(&mut ws) {
            Outbound::Frame(f) => last = Some(f),
            Outbound::Error { message, .. } => println!("error frame: {message}"),
            Outbound::Busy { .. } => unreachable!(),
        }
    }
    if let Some(f) = last {
        println!(
            "after {} ticks: gripper at {:.3?}, switches {}",
            f.tick,
            f.gripper.pose.position.as_slice(),
            f.switch_count
        );
    }
    ws.close(None).ok();
    let log = server.shutdown().expect("shutdown");
    println!("trials completed: {}", log.measured.len() + log.training.len());
}
