//! Network endpoints: the simulated rover's TCP server, the ground
//! station's rover link and its WebSocket console server.

use std::io::{ErrorKind, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, TryRecvError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use rvops_core::safety::{watchdog, TwistCommand};
use rvops_core::simkit::{Scene, SimConfig, SimTick, Simulator};
use rvops_wire::{encode_message, from_json, to_json, Hello, LogWriter, Payload, Role, StreamDecoder, WireMessage, PROTOCOL_VERSION};
use tungstenite::{Message, WebSocket};

use crate::config::PipelineConfig;
use crate::pipeline::{Counters, Pipeline};
use crate::rover::RoverPublisher;
use crate::GroundError;

const POLL: Duration = Duration::from_millis(5);
/// Ground-station tick period.
pub const TICK: Duration = Duration::from_millis(50);

fn spawn_reader(mut stream: TcpStream, tx: Sender<WireMessage>) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        let mut dec = StreamDecoder::new();
        let mut buf = [0u8; 64 * 1024];
        loop {
            match stream.read(&mut buf) {
                Ok(0) => break,
                Ok(n) => {
                    for m in dec.push(&buf[..n]) {
                        if tx.send(m).is_err() {
                            return;
                        }
                    }
                }
                Err(e) if e.kind() == ErrorKind::Interrupted => continue,
                Err(_) => break,
            }
        }
        for m in dec.finish() {
            let _ = tx.send(m);
        }
        let st = dec.stats();
        if st.dropped() > 0 {
            warn!("link closed with {} corrupt frames, {} bytes skipped", st.dropped(), st.skipped_bytes);
        }
    })
}

fn send_frame(stream: &mut TcpStream, m: &WireMessage) -> std::io::Result<()> {
    let bytes = encode_message(m).map_err(std::io::Error::other)?;
    stream.write_all(&bytes)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RoverReport {
    pub ticks: u64,
    pub commands: u64,
    pub collisions: u64,
}

/// Serves one simulated rover on `listener`, one ground link at a time, in
/// real time. Runs until `stop` is set or `max_ticks` is reached.
pub fn serve_rover(
    listener: TcpListener,
    scene: Scene,
    sim_cfg: SimConfig,
    watchdog_ms: u64,
    max_ticks: Option<u64>,
    stop: Arc<AtomicBool>,
    mut on_tick: impl FnMut(&SimTick),
) -> Result<RoverReport, GroundError> {
    listener.set_nonblocking(true)?;
    let mut sim = Simulator::new(scene, sim_cfg)?;
    let mut publisher = RoverPublisher::default();
    let mut report = RoverReport::default();
    let tick = Duration::from_secs_f64(sim_cfg.tick_s);

    while !stop.load(Ordering::Relaxed) {
        let (mut stream, peer) = match listener.accept() {
            Ok(c) => c,
            Err(e) if e.kind() == ErrorKind::WouldBlock => {
                thread::sleep(POLL);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        info!("ground link from {peer}");
        stream.set_nonblocking(false)?;
        stream.set_nodelay(true)?;
        let (tx, rx) = mpsc::channel();
        spawn_reader(stream.try_clone()?, tx);
        let hello = WireMessage::new(1, 0, Payload::Hello(Hello { role: Role::Rover, version: PROTOCOL_VERSION }));
        if send_frame(&mut stream, &hello).is_err() {
            continue;
        }

        let mut cmd = TwistCommand::stop(0);
        let mut last_cmd: Option<u64> = None;
        let start = Instant::now();
        let mut k: u32 = 0;
        'link: while !stop.load(Ordering::Relaxed) && max_ticks.is_none_or(|m| report.ticks < m) {
            loop {
                match rx.try_recv() {
                    Ok(m) => {
                        if let Payload::TwistCommand(t) = m.payload {
                            cmd = t.to_command(m.stamp_ns);
                            last_cmd = Some(sim.stamp_ns());
                            report.commands += 1;
                        }
                    }
                    Err(TryRecvError::Empty) => break,
                    Err(TryRecvError::Disconnected) => break 'link,
                }
            }
            if let Some(last) = last_cmd {
                if let Some(s) = watchdog(last, sim.stamp_ns(), watchdog_ms) {
                    cmd = s;
                    last_cmd = None;
                }
            }
            let t = sim.step(&cmd);
            report.ticks += 1;
            report.collisions += t.new_collisions.len() as u64;
            on_tick(&t);
            for m in publisher.tick_messages(t) {
                if send_frame(&mut stream, &m).is_err() {
                    break 'link;
                }
            }
            k += 1;
            let due = start + tick * k;
            let now = Instant::now();
            if due > now {
                thread::sleep(due - now);
            }
        }
        debug!("rover link ended after {} ticks", report.ticks);
        if max_ticks.is_some_and(|m| report.ticks >= m) {
            break;
        }
    }
    Ok(report)
}

struct Console {
    tx: Sender<String>,
    mask: Arc<Mutex<u16>>,
}

fn console_thread(mut ws: WebSocket<TcpStream>, inbox: Sender<WireMessage>, outbox: Receiver<String>, mask: Arc<Mutex<u16>>, stop: Arc<AtomicBool>) {
    let hello = WireMessage::new(1, 0, Payload::Hello(Hello { role: Role::Ground, version: PROTOCOL_VERSION }));
    if ws.send(Message::text(to_json(&hello))).is_err() {
        return;
    }
    while !stop.load(Ordering::Relaxed) {
        loop {
            match outbox.try_recv() {
                Ok(text) => {
                    if ws.write(Message::text(text)).is_err() {
                        return;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return,
            }
        }
        match ws.flush() {
            Ok(()) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
        match ws.read() {
            Ok(Message::Text(t)) => match from_json(&t) {
                Ok(m) => {
                    if let Payload::Subscribe { mask: bits } = m.payload {
                        *mask.lock().expect("mask lock") = bits;
                    }
                    if inbox.send(m).is_err() {
                        return;
                    }
                }
                Err(e) => warn!("console sent malformed message: {e}"),
            },
            Ok(Message::Close(_)) => return,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => return,
        }
    }
    let _ = ws.close(None);
}

fn spawn_ws_acceptor(listener: TcpListener, consoles: Arc<Mutex<Vec<Console>>>, inbox: Sender<WireMessage>, stop: Arc<AtomicBool>) -> Result<(), GroundError> {
    listener.set_nonblocking(true)?;
    thread::spawn(move || {
        while !stop.load(Ordering::Relaxed) {
            let stream = match listener.accept() {
                Ok((s, _)) => s,
                Err(e) if e.kind() == ErrorKind::WouldBlock => {
                    thread::sleep(POLL);
                    continue;
                }
                Err(_) => break,
            };
            if stream.set_nonblocking(false).is_err() {
                continue;
            }
            let ws = match tungstenite::accept(stream) {
                Ok(ws) => ws,
                Err(e) => {
                    warn!("websocket handshake failed: {e}");
                    continue;
                }
            };
            if ws.get_ref().set_read_timeout(Some(POLL)).is_err() {
                continue;
            }
            let (tx, rx) = mpsc::channel();
            let mask = Arc::new(Mutex::new(u16::MAX));
            consoles.lock().expect("console list").push(Console { tx, mask: mask.clone() });
            let (inbox, stop) = (inbox.clone(), stop.clone());
            thread::spawn(move || console_thread(ws, inbox, rx, mask, stop));
        }
    });
    Ok(())
}

fn broadcast(consoles: &Mutex<Vec<Console>>, msgs: &[WireMessage]) {
    if msgs.is_empty() {
        return;
    }
    let mut list = consoles.lock().expect("console list");
    let texts: Vec<(u16, String)> = msgs.iter().map(|m| (m.msg_type().mask_bit(), to_json(m))).collect();
    list.retain(|c| {
        let mask = *c.mask.lock().expect("mask lock");
        texts.iter().filter(|(bit, _)| mask & bit != 0).all(|(_, t)| c.tx.send(t.clone()).is_ok())
    });
}

fn connect_retry(addr: SocketAddr, stop: &AtomicBool) -> Option<TcpStream> {
    while !stop.load(Ordering::Relaxed) {
        match TcpStream::connect_timeout(&addr, Duration::from_millis(500)) {
            Ok(s) => return Some(s),
            Err(e) => {
                debug!("rover not reachable at {addr}: {e}");
                thread::sleep(Duration::from_millis(200));
            }
        }
    }
    None
}

/// Runs the ground station until `stop` is set or the rover link closes.
/// Rover traffic is appended to `record` when given.
pub fn run_ground<W: Write>(
    cfg: PipelineConfig,
    rover: SocketAddr,
    ws_listener: TcpListener,
    mut record: Option<LogWriter<W>>,
    stop: Arc<AtomicBool>,
) -> Result<Counters, GroundError> {
    cfg.validate()?;
    let consoles = Arc::new(Mutex::new(Vec::new()));
    let (console_tx, console_rx) = mpsc::channel();
    spawn_ws_acceptor(ws_listener, consoles.clone(), console_tx, stop.clone())?;

    let Some(mut link) = connect_retry(rover, &stop) else {
        return Ok(Counters::default());
    };
    link.set_nodelay(true)?;
    info!("connected to rover at {rover}");
    let (rover_tx, rover_rx) = mpsc::channel();
    spawn_reader(link.try_clone()?, rover_tx);
    let hello = WireMessage::new(1, 0, Payload::Hello(Hello { role: Role::Ground, version: PROTOCOL_VERSION }));
    send_frame(&mut link, &hello)?;

    let mut pipeline = Pipeline::new(cfg);
    let start = Instant::now();
    let mut next_tick = start + TICK;
    let mut open = true;
    while open && !stop.load(Ordering::Relaxed) {
        let now_ns = start.elapsed().as_nanos() as u64;
        let mut outs = Vec::new();
        loop {
            match rover_rx.try_recv() {
                Ok(m) => {
                    if let Some(w) = record.as_mut() {
                        w.write(&m)?;
                    }
                    outs.push(pipeline.on_rover_message(m));
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    open = false;
                    break;
                }
            }
        }
        while let Ok(m) = console_rx.try_recv() {
            outs.push(pipeline.on_console_message(m, now_ns));
        }
        if Instant::now() >= next_tick {
            outs.push(pipeline.on_tick(now_ns));
            next_tick += TICK;
        }
        for o in outs {
            for m in &o.to_rover {
                if send_frame(&mut link, m).is_err() {
                    open = false;
                }
            }
            broadcast(&consoles, &o.to_console);
        }
        thread::sleep(POLL);
    }
    if let Some(w) = record {
        w.into_inner()?;
    }
    Ok(pipeline.counters())
}
