//! Live WebSocket endpoint for a single interactive client.
//!
//! Outbound: one JSON text message per tick, `{"type":"frame","v":1,...}`,
//! plus `error` and `busy` messages. Inbound: `{"axis1":..,"axis2":..,"button":..}`
//! or `{"control":"start"|"pause"|"reset"}`; unknown fields are ignored.
//!
//! The session loop owns the [`Session`] and runs on its own thread. Each
//! connection gets a thread that forwards parsed messages to the loop over a
//! channel and relays frames back.

use crate::control::InputSample;
use crate::session::{write_frame, InputLatch, Outbound, Session, SessionConfig, SessionError, SessionStatus, TrialLog};
use serde::Deserialize;
use std::fs::File;
use std::io::{ErrorKind, LineWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};
use thiserror::Error;
use tungstenite::{Message, WebSocket};

const POLL: Duration = Duration::from_millis(2);

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("server thread panicked")]
    Panicked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlCommand {
    Start,
    Pause,
    Reset,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inbound {
    Input(InputSample),
    Control(ControlCommand),
}

#[derive(Deserialize)]
struct RawInbound {
    axis1: Option<f64>,
    axis2: Option<f64>,
    button: Option<bool>,
    control: Option<ControlCommand>,
}

/// Parses one inbound text message.
pub fn parse_inbound(text: &str) -> Result<Inbound, String> {
    let raw: RawInbound = serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))?;
    let has_input = raw.axis1.is_some() || raw.axis2.is_some() || raw.button.is_some();
    match (raw.control, has_input) {
        (Some(_), true) => Err("a message is either input or control, not both".into()),
        (Some(c), false) => Ok(Inbound::Control(c)),
        (None, true) => Ok(Inbound::Input(InputSample::new(
            raw.axis1.unwrap_or(0.0),
            raw.axis2.unwrap_or(0.0),
            raw.button.unwrap_or(false),
        ))),
        (None, false) => Err("message has neither input nor control fields".into()),
    }
}

#[derive(Clone, Debug)]
pub struct ServeOptions {
    pub session: SessionConfig,
    /// JSONL frame log.
    pub log: Option<PathBuf>,
    /// Wall-clock time per tick.
    pub pace: Duration,
}

impl ServeOptions {
    pub fn new(session: SessionConfig) -> Self {
        let pace = Duration::from_secs_f64(session.sim.dt());
        ServeOptions {
            session,
            log: None,
            pace,
        }
    }
}

enum ToLoop {
    Connect(u64, Sender<String>),
    Inbound(u64, Inbound),
    Disconnect(u64),
}

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: JoinHandle<()>,
    session: JoinHandle<Result<TrialLog, SessionError>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops all threads and returns the session's trial log.
    pub fn shutdown(self) -> Result<TrialLog, ServerError> {
        self.stop.store(true, Ordering::SeqCst);
        self.accept.join().map_err(|_| ServerError::Panicked)?;
        Ok(self.session.join().map_err(|_| ServerError::Panicked)??)
    }

    /// Blocks until the session has finished and its client has disconnected.
    pub fn wait(self) -> Result<TrialLog, ServerError> {
        let log = self.session.join().map_err(|_| ServerError::Panicked)??;
        self.stop.store(true, Ordering::SeqCst);
        self.accept.join().map_err(|_| ServerError::Panicked)?;
        Ok(log)
    }
}

pub fn serve(addr: impl ToSocketAddrs + std::fmt::Debug, opts: ServeOptions) -> Result<ServerHandle, ServerError> {
    let shown = format!("{addr:?}");
    let listener = TcpListener::bind(addr).map_err(|source| ServerError::Bind { addr: shown.clone(), source })?;
    let local = listener.local_addr().map_err(|source| ServerError::Bind { addr: shown.clone(), source })?;
    listener
        .set_nonblocking(true)
        .map_err(|source| ServerError::Bind { addr: shown, source })?;

    let session = Session::new(opts.session.clone())?;
    let log = match &opts.log {
        Some(path) => Some(LineWriter::new(File::create(path).map_err(SessionError::from)?)),
        None => None,
    };
    let stop = Arc::new(AtomicBool::new(false));
    let (tx, rx) = channel();

    let session_thread = {
        let stop = stop.clone();
        let pace = opts.pace;
        std::thread::spawn(move || session_loop(session, rx, log, pace, &stop))
    };
    let accept_thread = {
        let stop = stop.clone();
        std::thread::spawn(move || accept_loop(listener, tx, &stop))
    };
    log::info!("listening on ws://{local}");
    Ok(ServerHandle {
        addr: local,
        stop,
        accept: accept_thread,
        session: session_thread,
    })
}

fn accept_loop(listener: TcpListener, tx: Sender<ToLoop>, stop: &Arc<AtomicBool>) {
    let active: Arc<Mutex<Option<u64>>> = Arc::new(Mutex::new(None));
    let next_id = AtomicU64::new(1);
    let mut workers = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let _ = stream.set_nonblocking(false);
                let id = next_id.fetch_add(1, Ordering::SeqCst);
                let mut slot = active.lock().expect("active lock");
                if slot.is_some() {
                    log::info!("refusing {peer}: busy");
                    workers.push(std::thread::spawn(move || refuse_busy(stream)));
                    continue;
                }
                *slot = Some(id);
                drop(slot);
                log::info!("client {id} connected from {peer}");
                let (tx, stop, active) = (tx.clone(), stop.clone(), active.clone());
                workers.push(std::thread::spawn(move || {
                    connection(stream, id, &tx, &stop);
                    let _ = tx.send(ToLoop::Disconnect(id));
                    let mut slot = active.lock().expect("active lock");
                    if *slot == Some(id) {
                        *slot = None;
                    }
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => log::warn!("accept failed: {e}"),
        }
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        let _ = w.join();
    }
}

fn refuse_busy(stream: TcpStream) {
    if let Ok(mut ws) = tungstenite::accept(stream) {
        let _ = ws.send(Message::text(Outbound::busy().to_json()));
        let _ = ws.close(None);
        let _ = ws.flush();
    }
}

fn is_timeout(e: &tungstenite::Error) -> bool {
    matches!(e, tungstenite::Error::Io(io) if matches!(io.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut))
}

fn connection(stream: TcpStream, id: u64, tx: &Sender<ToLoop>, stop: &AtomicBool) {
    let mut ws: WebSocket<TcpStream> = match tungstenite::accept(stream) {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("handshake with client {id} failed: {e}");
            return;
        }
    };
    if ws.get_ref().set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let (out_tx, out_rx) = channel::<String>();
    if tx.send(ToLoop::Connect(id, out_tx)).is_err() {
        return;
    }
    loop {
        if stop.load(Ordering::SeqCst) {
            let _ = ws.close(None);
            let _ = ws.flush();
            return;
        }
        while let Ok(text) = out_rx.try_recv() {
            if ws.send(Message::text(text)).is_err() {
                return;
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => match parse_inbound(text.as_str()) {
                Ok(msg) => {
                    if tx.send(ToLoop::Inbound(id, msg)).is_err() {
                        return;
                    }
                }
                Err(e) => {
                    if ws.send(Message::text(Outbound::error(e).to_json())).is_err() {
                        return;
                    }
                }
            },
            Ok(Message::Close(_)) => return,
            Ok(_) => {}
            Err(e) if is_timeout(&e) => {}
            Err(_) => return,
        }
    }
}

fn session_loop(
    mut session: Session,
    rx: Receiver<ToLoop>,
    mut log: Option<LineWriter<File>>,
    pace: Duration,
    stop: &AtomicBool,
) -> Result<TrialLog, SessionError> {
    let mut client: Option<(u64, Sender<String>)> = None;
    let mut latch = InputLatch::default();
    let mut deadline = Instant::now() + pace;
    let send = |client: &Option<(u64, Sender<String>)>, msg: &Outbound| {
        if let Some((_, out)) = client {
            let _ = out.send(msg.to_json());
        }
    };

    while !stop.load(Ordering::SeqCst) {
        let wait = deadline.saturating_duration_since(Instant::now()).min(Duration::from_millis(20));
        match rx.recv_timeout(wait) {
            Ok(ToLoop::Connect(id, out)) => {
                client = Some((id, out));
                latch.clear();
                send(&client, &Outbound::Frame(session.frame()));
            }
            Ok(ToLoop::Disconnect(id)) => {
                if client.as_ref().is_some_and(|c| c.0 == id) {
                    client = None;
                    latch.clear();
                    session.pause();
                }
            }
            Ok(ToLoop::Inbound(id, msg)) if client.as_ref().is_some_and(|c| c.0 == id) => match msg {
                Inbound::Input(input) => latch.push(input),
                Inbound::Control(ControlCommand::Start) => {
                    if session.status() == SessionStatus::Idle {
                        session.start();
                        if let Some(out) = log.as_mut() {
                            write_frame(out, &session.frame())?;
                        }
                    } else {
                        session.start();
                    }
                }
                Inbound::Control(ControlCommand::Pause) => session.pause(),
                Inbound::Control(ControlCommand::Reset) => {
                    session.reset();
                    latch.clear();
                    send(&client, &Outbound::Frame(session.frame()));
                }
            },
            Ok(ToLoop::Inbound(..)) => {}
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => {
                // The accept loop has exited; keep ticking until told to stop.
                std::thread::sleep(wait);
            }
        }
        let now = Instant::now();
        if now < deadline {
            continue;
        }
        deadline = if now - deadline > pace * 10 { now + pace } else { deadline + pace };
        if session.status() == SessionStatus::Running {
            let frame = session.step(latch.take())?;
            if let Some(out) = log.as_mut() {
                write_frame(out, &frame)?;
            }
            send(&client, &Outbound::Frame(frame));
        }
        if session.status() == SessionStatus::Finished && client.is_none() {
            break;
        }
    }
    Ok(session.into_log())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_input_and_control() {
        assert_eq!(
            parse_inbound(r#"{"axis1":0.5,"button":true,"extra":1}"#),
            Ok(Inbound::Input(InputSample::new(0.5, 0.0, true)))
        );
        assert_eq!(
            parse_inbound(r#"{"axis1":3.0,"axis2":-2}"#),
            Ok(Inbound::Input(InputSample::new(1.0, -1.0, false)))
        );
        assert_eq!(
            parse_inbound(r#"{"control":"pause"}"#),
            Ok(Inbound::Control(ControlCommand::Pause))
        );
    }

    #[test]
    fn rejects_malformed() {
        for bad in ["", "nope", "[1,2]", r#"{"axis1":"x"}"#, r#"{"control":"jump"}"#, "{}", r#"{"control":"start","axis1":1}"#] {
            assert!(parse_inbound(bad).is_err(), "{bad}");
        }
    }
}
