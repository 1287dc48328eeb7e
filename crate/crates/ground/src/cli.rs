//! The `rvops` command line.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use rvops_core::simkit::{generate_scene, Scene, SceneParams, SimConfig};
use rvops_wire::{replay, to_json, LogWriter, MsgType, Payload, WireMessage};
use serde::{Deserialize, Serialize};

use crate::acceptance;
use crate::config::PipelineConfig;
use crate::net::{run_ground, serve_rover};
use crate::pipeline::Pipeline;
use crate::scenario::{run_scenario, RunOptions, Scenario, TruthRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const SCENE_FILE_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "rvops", version, about = "Headless rover simulator, ground station and test driver", arg_required_else_help = true)]
pub struct Cli {
    /// Log filter, e.g. `info` or `rvops_ground=debug`.
    #[arg(long, global = true, default_value = "warn", env = "RVOPS_LOG")]
    pub log_level: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve a simulated rover over TCP in real time.
    Sim(SimArgs),
    /// Run the ground station against a rover.
    Ground(GroundArgs),
    /// Scripted in-process runs.
    Scenario {
        #[command(subcommand)]
        action: ScenarioCommand,
    },
    /// Run the ground station and record the rover stream to a log.
    Record(RecordArgs),
    /// Feed a recorded log through a fresh pipeline.
    Replay(ReplayArgs),
    /// Write a generated scene as JSON.
    GenScene(GenSceneArgs),
    /// Run the built-in acceptance suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Scene file from `gen-scene`; overrides --seed.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long, env = "RVOPS_ROVER_PORT", default_value_t = 7401)]
    pub port: u16,
    /// Stop after this many simulator ticks.
    #[arg(long)]
    pub ticks: Option<u64>,
    /// Write one JSON line of ground truth per tick.
    #[arg(long)]
    pub truth_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StationArgs {
    #[arg(long, env = "RVOPS_ROVER_ADDR", default_value = "127.0.0.1:7401")]
    pub rover: SocketAddr,
    #[arg(long, env = "RVOPS_WS_PORT")]
    pub ws_port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Exit after this many seconds.
    #[arg(long)]
    pub duration_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    #[command(flatten)]
    pub station: StationArgs,
    /// Also record the rover stream to this log.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    pub path: PathBuf,
    #[command(flatten)]
    pub station: StationArgs,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub path: PathBuf,
    /// Pace messages by their stamps.
    #[arg(long)]
    pub realtime: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the pipeline's console publications as JSON lines.
    #[arg(long)]
    pub publications: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// Run a scenario file and print its metrics as JSON.
    Run(ScenarioRunArgs),
}

#[derive(Debug, Args)]
pub struct ScenarioRunArgs {
    pub file: PathBuf,
    #[arg(long, value_enum)]
    pub safety: Option<OnOff>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub truth_log: Option<PathBuf>,
    /// Record the rover stream to a log.
    #[arg(long)]
    pub record: Option<PathBuf>,
    #[arg(long)]
    pub publications: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenSceneArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rock_count: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Run only these criteria.
    pub only: Vec<String>,
    /// List criterion names and exit.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SceneFile {
    pub version: u32,
    pub scene: Scene,
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: SceneFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if file.version != SCENE_FILE_VERSION {
        bail!("unsupported scene file version {}", file.version);
    }
    Ok(file.scene)
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    Ok(match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => PipelineConfig::default(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_jsonl<'a>(path: &Path, msgs: impl IntoIterator<Item = &'a WireMessage>) -> Result<()> {
    let mut w = create(path)?;
    for m in msgs {
        writeln!(w, "{}", to_json(m))?;
    }
    w.flush()?;
    Ok(())
}

fn stop_after(duration_s: Option<f64>) -> Arc<AtomicBool> {
    let stop = Arc::new(AtomicBool::new(false));
    if let Some(d) = duration_s {
        let s = stop.clone();
        thread::spawn(move || {
            thread::sleep(Duration::from_secs_f64(d.max(0.0)));
            s.store(true, Ordering::Relaxed);
        });
    }
    stop
}

fn cmd_sim(a: SimArgs) -> Result<()> {
    let scene = match &a.scene {
        Some(p) => load_scene(p)?,
        None => generate_scene(a.seed, &SceneParams::default())?,
    };
    let listener = TcpListener::bind((a.bind.as_str(), a.port)).with_context(|| format!("binding {}:{}", a.bind, a.port))?;
    info!("rover listening on {}", listener.local_addr()?);
    let mut truth = a.truth_log.as_deref().map(create).transpose()?;
    let mut write_err = None;
    let cfg = PipelineConfig::default();
    let report = serve_rover(listener, scene, SimConfig::default(), cfg.safety.watchdog_timeout_ms, a.ticks, stop_after(None), |t| {
        if let Some(w) = truth.as_mut() {
            let line = serde_json::to_string(&TruthRecord::from(t)).expect("truth serializes");
            if let Err(e) = writeln!(w, "{line}") {
                write_err.get_or_insert(e);
            }
        }
    })?;
    if let Some(e) = write_err {
        return Err(e).context("writing truth log");
    }
    if let Some(mut w) = truth {
        w.flush()?;
    }
    println!("{}", serde_json::json!({ "ticks": report.ticks, "commands": report.commands, "collisions": report.collisions }));
    Ok(())
}

fn cmd_station(s: StationArgs, record: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(s.config.as_deref())?;
    let port = s.ws_port.unwrap_or(cfg.ws_port);
    let ws = TcpListener::bind((s.bind.as_str(), port)).with_context(|| format!("binding {}:{port}", s.bind))?;
    info!("console endpoint ws://{}", ws.local_addr()?);
    let stop = stop_after(s.duration_s);
    let log = record.as_deref().map(|p| LogWriter::new(create(p)?).map_err(anyhow::Error::from)).transpose()?;
    let counters = run_ground(cfg, s.rover, ws, log, stop)?;
    println!(
        "{}",
        serde_json::json!({
            "frames_processed": counters.frames_processed,
            "frames_skipped": counters.frames_skipped,
            "watchdog_stops": counters.watchdog_stops,
            "blocked_statuses": counters.blocked_statuses,
        })
    );
    Ok(())
}

fn cmd_scenario(a: ScenarioRunArgs) -> Result<()> {
    let sc = Scenario::load(&a.file).with_context(|| format!("loading {}", a.file.display()))?;
    let opts = RunOptions { safety: a.safety.map(|s| s == OnOff::On), config: load_config(a.config.as_deref())?, sim: None };
    let out = run_scenario(&sc, &opts)?;
    if let Some(p) = &a.truth_log {
        let mut w = create(p)?;
        w.write_all(out.truth_jsonl().as_bytes())?;
        w.flush()?;
    }
    if let Some(p) = &a.record {
        let mut log = LogWriter::new(create(p)?)?;
        for m in &out.rover_stream {
            log.write(m)?;
        }
        log.into_inner()?.flush()?;
    }
    if let Some(p) = &a.publications {
        write_jsonl(p, &out.publications)?;
    }
    println!("{}", out.metrics.to_json());
    Ok(())
}

fn cmd_replay(a: ReplayArgs) -> Result<()> {
    let cfg = load_config(a.config.as_deref())?;
    let mut pipeline = Pipeline::new(cfg);
    let mut pubs = Vec::new();
    let contents = replay(&a.path, a.realtime, |m| pubs.extend(pipeline.on_rover_message(m).to_console))
        .with_context(|| format!("replaying {}", a.path.display()))?;
    if contents.warnings > 0 {
        log::warn!("{} warning(s) while reading {}", contents.warnings, a.path.display());
    }
    if let Some(p) = &a.publications {
        write_jsonl(p, &pubs)?;
    }
    let last_landmarks = pubs.iter().rev().find_map(|m| match &m.payload {
        Payload::LandmarkSet { landmarks } => Some(landmarks.clone()),
        _ => None,
    });
    let landmarks = last_landmarks.unwrap_or_default();
    let c = pipeline.counters();
    println!(
        "{}",
        serde_json::json!({
            "messages": contents.messages.len(),
            "warnings": contents.warnings,
            "frames_processed": c.frames_processed,
            "frames_skipped": c.frames_skipped,
            "detection_sets": pipeline.published(MsgType::DetectionSet),
            "landmarks": landmarks.len(),
            "confirmed": landmarks.iter().filter(|l| l.confirmed).count(),
        })
    );
    Ok(())
}

fn cmd_gen_scene(a: GenSceneArgs) -> Result<()> {
    let defaults = SceneParams::default();
    let params = SceneParams { rock_count: a.rock_count.unwrap_or(defaults.rock_count), ..defaults };
    let scene = generate_scene(a.seed, &params)?;
    let text = serde_json::to_string_pretty(&SceneFile { version: SCENE_FILE_VERSION, scene })?;
    std::fs::write(&a.out, text + "\n").with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

/// Returns whether every selected criterion passed.
fn cmd_selftest(a: SelftestArgs) -> Result<bool> {
    if a.list {
        for (name, _) in acceptance::CRITERIA {
            println!("{name}");
        }
        return Ok(true);
    }
    if let Some(bad) = a.only.iter().find(|n| !acceptance::CRITERIA.iter().any(|c| c.0 == n.as_str())) {
        bail!("unknown criterion '{bad}'");
    }
    let results = acceptance::run_all(&a.only, |r| println!("{}", r.line()));
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    Ok(passed == results.len())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sim(a) => cmd_sim(a).map(|_| true),
        Command::Ground(a) => cmd_station(a.station, a.record).map(|_| true),
        Command::Record(a) => cmd_station(a.station, Some(a.path)).map(|_| true),
        Command::Scenario { action: ScenarioCommand::Run(a) } => cmd_scenario(a).map(|_| true),
        Command::Replay(a) => cmd_replay(a).map(|_| true),
        Command::GenScene(a) => cmd_gen_scene(a).map(|_| true),
        Command::Selftest(a) => cmd_selftest(a),
    }
}

/// Parses `args` and runs the chosen subcommand, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::new().parse_filters(&cli.log_level).format_timestamp_millis().try_init();
    match dispatch(cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_RUNTIME,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}
