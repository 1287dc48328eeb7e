//! Scripted headless runs: scenario files, the in-process runner and its
//! metrics.
//!
//! A scenario file is line oriented. The first line is `rvscen 1`; blank
//! lines and `#` comments are skipped. Keys:
//!
//! ```text
//! scene_seed <u64>          required
//! duration_s <f64>          required
//! mode <2d|3d>              default 2d
//! safety <on|off>           default on
//! rock_count <usize>        generated rocks; default 12, or 0 if any `rock` line is given
//! roughness <f64>           terrain amplitude bound, meters
//! rock <x> <y> <r>          extra rock resting on the terrain
//! goal <x> <y> <r>          completion region
//! repeat_hz <f64>           resend rate of the standing command; 0 sends only listed lines; default 10
//! t=<f64> v=<f64> w=<f64>   command taking effect at time t
//! ```

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rvops_core::safety::{CommandSource, TwistCommand, CLEARANCE_SENTINEL};
use rvops_core::simkit::{generate_scene, RoverState, Scene, SceneParams, SimConfig, SimTick, Simulator};
use rvops_wire::{MetricsRecord, Payload, WireMessage};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::pipeline::{Counters, Output, Pipeline};
use crate::rover::RoverPublisher;
use crate::GroundError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::TwoD => "2d",
            Mode::ThreeD => "3d",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptCommand {
    pub t: f64,
    pub v: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Goal {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub scene_seed: u64,
    pub duration_s: f64,
    pub mode: Mode,
    pub safety: bool,
    pub rock_count: Option<usize>,
    pub roughness: Option<f64>,
    pub rocks: Vec<(f64, f64, f64)>,
    pub goal: Option<Goal>,
    pub repeat_hz: f64,
    pub commands: Vec<ScriptCommand>,
}

fn num<T: FromStr>(s: &str, line: usize, what: &str) -> Result<T, GroundError> {
    s.parse().map_err(|_| GroundError::Scenario { line, msg: format!("invalid {what} '{s}'") })
}

fn finite(x: f64, line: usize, what: &str) -> Result<f64, GroundError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(GroundError::Scenario { line, msg: format!("{what} must be finite") })
    }
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, GroundError> {
        let err = |line: usize, msg: String| GroundError::Scenario { line, msg };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        match lines.next() {
            Some((_, "rvscen 1")) => {}
            Some((n, l)) if l.starts_with("rvscen ") => return Err(GroundError::ScenarioVersion(l[7..].trim().to_string(), n)),
            Some((n, _)) => return Err(err(n, "expected header 'rvscen 1'".into())),
            None => return Err(err(0, "empty scenario".into())),
        }

        let (mut seed, mut duration) = (None, None);
        let mut sc = Scenario {
            scene_seed: 0,
            duration_s: 0.0,
            mode: Mode::TwoD,
            safety: true,
            rock_count: None,
            roughness: None,
            rocks: Vec::new(),
            goal: None,
            repeat_hz: 10.0,
            commands: Vec::new(),
        };
        for (n, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts[0].contains('=') {
                let mut fields = [None; 3];
                for p in &parts {
                    let (k, v) = p.split_once('=').ok_or_else(|| err(n, format!("expected key=value, got '{p}'")))?;
                    let slot = match k {
                        "t" => 0,
                        "v" => 1,
                        "w" => 2,
                        _ => return Err(err(n, format!("unknown command field '{k}'"))),
                    };
                    if fields[slot].is_some() {
                        return Err(err(n, format!("duplicate field '{k}'")));
                    }
                    fields[slot] = Some(finite(num(v, n, k)?, n, k)?);
                }
                let [Some(t), Some(v), Some(w)] = fields else {
                    return Err(err(n, "command needs t=, v= and w=".into()));
                };
                if t < 0.0 || sc.commands.last().is_some_and(|c| c.t > t) {
                    return Err(err(n, "command times must be non-negative and non-decreasing".into()));
                }
                sc.commands.push(ScriptCommand { t, v, w });
                continue;
            }
            let args = &parts[1..];
            let want = |k: usize| {
                if args.len() == k {
                    Ok(())
                } else {
                    Err(err(n, format!("'{}' takes {k} value(s)", parts[0])))
                }
            };
            match parts[0] {
                "scene_seed" => {
                    want(1)?;
                    seed = Some(num(args[0], n, "seed")?);
                }
                "duration_s" => {
                    want(1)?;
                    let d: f64 = num(args[0], n, "duration")?;
                    if !(d > 0.0 && d.is_finite()) {
                        return Err(err(n, "duration must be positive".into()));
                    }
                    duration = Some(d);
                }
                "mode" => {
                    want(1)?;
                    sc.mode = match args[0] {
                        "2d" => Mode::TwoD,
                        "3d" => Mode::ThreeD,
                        m => return Err(err(n, format!("unknown mode '{m}'"))),
                    };
                }
                "safety" => {
                    want(1)?;
                    sc.safety = match args[0] {
                        "on" => true,
                        "off" => false,
                        s => return Err(err(n, format!("safety must be on or off, got '{s}'"))),
                    };
                }
                "rock_count" => {
                    want(1)?;
                    sc.rock_count = Some(num(args[0], n, "rock count")?);
                }
                "roughness" => {
                    want(1)?;
                    sc.roughness = Some(finite(num(args[0], n, "roughness")?, n, "roughness")?);
                }
                "repeat_hz" => {
                    want(1)?;
                    let hz: f64 = num(args[0], n, "rate")?;
                    if !(hz >= 0.0 && hz.is_finite()) {
                        return Err(err(n, "repeat_hz must be non-negative".into()));
                    }
                    sc.repeat_hz = hz;
                }
                "rock" | "goal" => {
                    want(3)?;
                    let vals = [num(args[0], n, "x")?, num(args[1], n, "y")?, num(args[2], n, "radius")?];
                    if vals.iter().any(|v: &f64| !v.is_finite()) || !(vals[2] > 0.0) {
                        return Err(err(n, "positions must be finite and radius positive".into()));
                    }
                    if parts[0] == "rock" {
                        sc.rocks.push((vals[0], vals[1], vals[2]));
                    } else {
                        sc.goal = Some(Goal { x: vals[0], y: vals[1], radius: vals[2] });
                    }
                }
                k => return Err(err(n, format!("unknown key '{k}'"))),
            }
        }
        sc.scene_seed = seed.ok_or_else(|| err(0, "missing scene_seed".into()))?;
        sc.duration_s = duration.ok_or_else(|| err(0, "missing duration_s".into()))?;
        Ok(sc)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, GroundError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn build_scene(&self) -> Result<Scene, GroundError> {
        let defaults = SceneParams::default();
        let params = SceneParams {
            rock_count: self.rock_count.unwrap_or(if self.rocks.is_empty() { defaults.rock_count } else { 0 }),
            roughness: self.roughness.unwrap_or(defaults.roughness),
            ..defaults
        };
        let mut scene = generate_scene(self.scene_seed, &params)?;
        for &(x, y, r) in &self.rocks {
            scene.place_rock(x, y, r);
        }
        Ok(scene)
    }
}

/// Metrics written as one JSON object, keys in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub elapsed_s: f64,
    pub collisions: u32,
    pub min_clearance_m: f64,
    pub distance_m: f64,
    pub completed: bool,
    pub mode: Mode,
    pub safety: String,
    pub blocked_statuses: u64,
    pub watchdog_stops: u64,
    pub frames: u64,
}

impl Metrics {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metrics always serialize")
    }

    pub fn record(&self) -> MetricsRecord {
        MetricsRecord {
            elapsed_s: self.elapsed_s,
            collisions: self.collisions,
            min_clearance_m: self.min_clearance_m,
            distance_m: self.distance_m,
            completed: self.completed,
        }
    }
}

/// One simulator tick of ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub tick: u64,
    pub stamp_ns: u64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub contacts: Vec<usize>,
}

impl From<&SimTick> for TruthRecord {
    fn from(t: &SimTick) -> Self {
        Self {
            tick: t.tick,
            stamp_ns: t.stamp_ns,
            x: t.truth.x,
            y: t.truth.y,
            theta: t.truth.theta,
            v: t.truth.v,
            omega: t.truth.omega,
            contacts: t.contacts.clone(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the file's `safety` line.
    pub safety: Option<bool>,
    pub config: PipelineConfig,
    pub sim: Option<SimConfig>,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub metrics: Metrics,
    pub truth: Vec<TruthRecord>,
    /// Rover-to-ground traffic in arrival order.
    pub rover_stream: Vec<WireMessage>,
    /// Everything the ground published to consoles.
    pub publications: Vec<WireMessage>,
    /// Commands forwarded to the rover, one entry per tick.
    pub forwarded: Vec<TwistCommand>,
    /// Stamp of the last operator command delivered before each tick.
    pub last_command_ns: Vec<Option<u64>>,
    pub counters: Counters,
    pub mean_frame_latency: Option<Duration>,
}

impl ScenarioOutcome {
    pub fn truth_jsonl(&self) -> String {
        self.truth.iter().map(|r| serde_json::to_string(r).expect("truth serializes") + "\n").collect()
    }
}

fn clearance(scene: &Scene, st: &RoverState, rover_radius: f64) -> f64 {
    scene
        .rocks
        .iter()
        .map(|r| (st.x - r.x).hypot(st.y - r.y) - r.radius - rover_radius)
        .fold(f64::INFINITY, f64::min)
}

/// Runs simulator and pipeline in one process, deterministically.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<ScenarioOutcome, GroundError> {
    let mut cfg = opts.config.clone();
    cfg.safety_enabled = opts.safety.unwrap_or(sc.safety);
    cfg.validate()?;
    let sim_cfg = SimConfig { intrinsics: cfg.intrinsics, mount: cfg.mount, ..opts.sim.unwrap_or_default() };
    let scene = sc.build_scene()?;
    let mut sim = Simulator::new(scene.clone(), sim_cfg)?;
    let mut pipeline = Pipeline::new(cfg.clone());
    let mut publisher = RoverPublisher::default();

    let tick_ns = (sim_cfg.tick_s * 1e9).round() as u64;
    let n_ticks = (sc.duration_s / sim_cfg.tick_s).round() as u64;
    let repeat_ns = (sc.repeat_hz > 0.0).then(|| (1e9 / sc.repeat_hz).round() as u64);
    let script: Vec<(u64, ScriptCommand)> = sc.commands.iter().map(|c| ((c.t * 1e9).round() as u64, *c)).collect();

    let mut out = ScenarioOutcome {
        metrics: Metrics {
            elapsed_s: sc.duration_s,
            collisions: 0,
            min_clearance_m: CLEARANCE_SENTINEL,
            distance_m: 0.0,
            completed: false,
            mode: sc.mode,
            safety: if cfg.safety_enabled { "on" } else { "off" }.into(),
            blocked_statuses: 0,
            watchdog_stops: 0,
            frames: 0,
        },
        truth: Vec::new(),
        rover_stream: Vec::new(),
        publications: Vec::new(),
        forwarded: Vec::new(),
        last_command_ns: Vec::new(),
        counters: Counters::default(),
        mean_frame_latency: None,
    };

    let mut active = TwistCommand::stop(0);
    let mut next = 0;
    let mut standing: Option<ScriptCommand> = None;
    let mut next_repeat = u64::MAX;
    let mut last_sent = None;
    let mut min_clear = clearance(&scene, sim.truth(), sim_cfg.rover_radius);
    let mut reached = false;

    let absorb = |o: Output, active: &mut TwistCommand, pubs: &mut Vec<WireMessage>| {
        if let Some(f) = o.forwarded() {
            *active = f;
        }
        pubs.extend(o.to_console);
    };

    for k in 0..n_ticks {
        let now = k * tick_ns;
        let mut to_send = Vec::new();
        while next < script.len() && script[next].0 <= now {
            standing = Some(script[next].1);
            to_send.push(script[next].1);
            next += 1;
            next_repeat = repeat_ns.map_or(u64::MAX, |p| now + p);
        }
        if to_send.is_empty() && now >= next_repeat {
            if let Some(c) = standing {
                to_send.push(c);
                next_repeat += repeat_ns.expect("set together with standing");
            }
        }
        for c in to_send {
            let cmd = TwistCommand { v: c.v, omega: c.w, stamp_ns: now, source: CommandSource::Script };
            absorb(pipeline.on_console_command(cmd, now), &mut active, &mut out.publications);
            last_sent = Some(now);
        }
        out.last_command_ns.push(last_sent);
        absorb(pipeline.on_tick(now), &mut active, &mut out.publications);
        out.forwarded.push(active);

        let before = *sim.truth();
        let tick = sim.step(&active);
        out.metrics.collisions += tick.new_collisions.len() as u32;
        out.metrics.distance_m += (tick.truth.x - before.x).hypot(tick.truth.y - before.y);
        min_clear = min_clear.min(clearance(&scene, &tick.truth, sim_cfg.rover_radius));
        out.truth.push(TruthRecord::from(&tick));
        let truth = tick.truth;
        let stamp = tick.stamp_ns;
        for m in publisher.tick_messages(tick) {
            out.rover_stream.push(m.clone());
            absorb(pipeline.on_rover_message(m), &mut active, &mut out.publications);
        }
        if let Some(g) = sc.goal {
            if (truth.x - g.x).hypot(truth.y - g.y) < g.radius {
                reached = true;
                out.metrics.elapsed_s = stamp as f64 * 1e-9;
                break;
            }
        }
    }

    let counters = pipeline.counters();
    out.metrics.min_clearance_m = if min_clear.is_finite() { min_clear.max(0.0) } else { CLEARANCE_SENTINEL };
    out.metrics.completed = match sc.goal {
        Some(_) => reached,
        None => out.metrics.collisions == 0,
    };
    out.metrics.blocked_statuses = counters.blocked_statuses;
    out.metrics.watchdog_stops = counters.watchdog_stops;
    out.metrics.frames = counters.frames_processed;
    let stamp = out.truth.last().map_or(0, |t| t.stamp_ns);
    out.publications.push(WireMessage::new(1, stamp, Payload::MetricsReport(out.metrics.record())));
    out.counters = counters;
    out.mean_frame_latency = pipeline.mean_frame_latency();
    Ok(out)
}

/// Feeds a recorded rover stream through a fresh pipeline and returns its
/// console publications.
pub fn replay_through_pipeline(stream: impl IntoIterator<Item = WireMessage>, cfg: &PipelineConfig) -> (Vec<WireMessage>, Counters) {
    let mut p = Pipeline::new(cfg.clone());
    let mut pubs = Vec::new();
    for m in stream {
        pubs.extend(p.on_rover_message(m).to_console);
    }
    (pubs, p.counters())
}
