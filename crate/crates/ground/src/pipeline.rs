use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rvops_core::mapping::{associate_landmarks, build_heightmap_mesh, LandmarkTracker, Roi, SurfaceMesh};
use rvops_core::perception::{detect_rocks, frame_to_points};
use rvops_core::safety::{safety_gate, watchdog, SafetyState, SafetyStatus, TwistCommand};
use rvops_core::simkit::{mix_seed, DepthFrame, RoverState};
use rvops_core::{Pose, Vec3f, VoxelGrid};
use rvops_wire::{DepthImage, LandmarkRecord, MsgType, Payload, RgbImage, TwistRecord, WireMessage};

use crate::config::PipelineConfig;

const POSE_BUFFER: usize = 64;

/// Messages produced by one pipeline step, split by destination.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub to_rover: Vec<WireMessage>,
    pub to_console: Vec<WireMessage>,
}

impl Output {
    fn extend(&mut self, other: Output) {
        self.to_rover.extend(other.to_rover);
        self.to_console.extend(other.to_console);
    }

    /// Last command forwarded to the rover, if any.
    pub fn forwarded(&self) -> Option<TwistCommand> {
        self.to_rover.iter().rev().find_map(|m| match &m.payload {
            Payload::TwistCommand(t) => Some(t.to_command(m.stamp_ns)),
            _ => None,
        })
    }

    pub fn statuses(&self) -> impl Iterator<Item = &SafetyStatus> {
        self.to_console.iter().filter_map(|m| match &m.payload {
            Payload::SafetyStatus(s) => Some(s),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub frames_processed: u64,
    /// Frames dropped for lack of a pose within the pairing window.
    pub frames_skipped: u64,
    pub no_ground_frames: u64,
    pub malformed_commands: u64,
    pub watchdog_stops: u64,
    pub blocked_statuses: u64,
    pub ignored_messages: u64,
}

/// Ground-station processing state. Single writer; every input is a
/// message or a clock tick and every output is a list of messages.
pub struct Pipeline {
    cfg: PipelineConfig,
    poses: VecDeque<(u64, Pose)>,
    pending_rgb: Option<(u32, RgbImage)>,
    grid: VoxelGrid,
    tracker: LandmarkTracker,
    status: SafetyStatus,
    latest_cmd: Option<TwistCommand>,
    last_cmd_ns: Option<u64>,
    seqs: [u32; 14],
    frames_since_mesh: u32,
    mesh_generation: u32,
    counters: Counters,
    latency_total: Duration,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Self {
        let status = SafetyStatus::clear(cfg.safety.horizon);
        Self {
            grid: VoxelGrid::new(cfg.voxel_size),
            tracker: LandmarkTracker::new(cfg.tracker),
            cfg,
            poses: VecDeque::new(),
            pending_rgb: None,
            status,
            latest_cmd: None,
            last_cmd_ns: None,
            seqs: [0; 14],
            frames_since_mesh: 0,
            mesh_generation: 0,
            counters: Counters::default(),
            latency_total: Duration::ZERO,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn tracker(&self) -> &LandmarkTracker {
        &self.tracker
    }

    pub fn voxel_grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn status(&self) -> SafetyStatus {
        self.status
    }

    /// Mean wall-clock time spent per processed depth frame.
    pub fn mean_frame_latency(&self) -> Option<Duration> {
        (self.counters.frames_processed > 0).then(|| self.latency_total / self.counters.frames_processed as u32)
    }

    pub fn latest_pose(&self) -> Option<Pose> {
        self.poses.back().map(|p| p.1)
    }

    fn publish(&mut self, stamp_ns: u64, payload: Payload) -> WireMessage {
        let slot = &mut self.seqs[payload.msg_type().code() as usize];
        *slot += 1;
        WireMessage::new(*slot, stamp_ns, payload)
    }

    /// Pose whose stamp is nearest to `stamp_ns`, if within the pairing window.
    fn paired_pose(&self, stamp_ns: u64) -> Option<Pose> {
        let window = self.cfg.pose_pairing_ms * 1_000_000;
        self.poses
            .iter()
            .map(|(t, p)| (t.abs_diff(stamp_ns), *p))
            .min_by_key(|(d, _)| *d)
            .filter(|(d, _)| *d <= window)
            .map(|(_, p)| p)
    }

    pub fn on_pose(&mut self, stamp_ns: u64, pose: Pose) {
        if self.poses.len() == POSE_BUFFER {
            self.poses.pop_front();
        }
        self.poses.push_back((stamp_ns, pose));
    }

    /// Handles one message from the rover link.
    pub fn on_rover_message(&mut self, m: WireMessage) -> Output {
        let mut out = Output::default();
        match m.payload {
            Payload::PoseEstimate { pose } => {
                self.on_pose(m.stamp_ns, pose);
                let fwd = self.publish(m.stamp_ns, Payload::PoseEstimate { pose });
                out.to_console.push(fwd);
            }
            Payload::RgbFrame(img) => self.pending_rgb = Some((m.seq, img)),
            Payload::DepthFrame(img) => {
                let rgb = match self.pending_rgb.take() {
                    Some((seq, img)) if seq == m.seq => Some(img),
                    _ => None,
                };
                out.to_console = self.on_depth_frame(m.seq, m.stamp_ns, img, rgb);
            }
            Payload::MetricsReport(r) => {
                let fwd = self.publish(m.stamp_ns, Payload::MetricsReport(r));
                out.to_console.push(fwd);
            }
            Payload::Heartbeat | Payload::Hello(_) => {}
            _ => self.counters.ignored_messages += 1,
        }
        out
    }

    /// Handles one message from a console; `now_ns` is the receive time.
    pub fn on_console_message(&mut self, m: WireMessage, now_ns: u64) -> Output {
        match m.payload {
            Payload::TwistCommand(t) => self.on_console_command(t.to_command(m.stamp_ns), now_ns),
            Payload::Hello(_) | Payload::Subscribe { .. } | Payload::Heartbeat => Output::default(),
            _ => {
                self.counters.ignored_messages += 1;
                Output::default()
            }
        }
    }

    /// Runs detection, mapping and tracking on one depth frame.
    pub fn on_depth_frame(&mut self, seq: u32, stamp_ns: u64, depth: DepthImage, rgb: Option<RgbImage>) -> Vec<WireMessage> {
        let Some(pose) = self.paired_pose(stamp_ns) else {
            self.counters.frames_skipped += 1;
            return Vec::new();
        };
        let k = &self.cfg.intrinsics;
        if (depth.width as u32, depth.height as u32) != (k.width, k.height) {
            self.counters.ignored_messages += 1;
            return Vec::new();
        }
        let started = Instant::now();
        let mut pubs = Vec::new();
        if let Some(img) = rgb {
            pubs.push(self.publish(stamp_ns, Payload::RgbFrame(img)));
        }

        let frame = DepthFrame { seq, stamp_ns, width: depth.width as u32, height: depth.height as u32, data: depth.data };
        let k = &self.cfg.intrinsics;
        let cam = self.cfg.mount.camera_in_world(&pose);
        let detections = match detect_rocks(&frame, k, &cam, &self.cfg.detector, mix_seed(self.cfg.seed, seq as u64)) {
            Ok((d, _)) => d,
            Err(_) => {
                self.counters.no_ground_frames += 1;
                Vec::new()
            }
        };
        let points = frame_to_points(&frame, k, &cam, self.cfg.detector.stride);
        for p in &points {
            self.grid.insert(p.world);
        }
        associate_landmarks(&mut self.tracker, &detections, seq);

        pubs.push(self.publish(stamp_ns, Payload::DetectionSet { detections }));
        let landmarks = self.tracker.landmarks().iter().map(LandmarkRecord::from).collect();
        pubs.push(self.publish(stamp_ns, Payload::LandmarkSet { landmarks }));

        self.frames_since_mesh += 1;
        if self.frames_since_mesh >= self.cfg.mesh.regen_every {
            self.frames_since_mesh = 0;
            self.mesh_generation += 1;
            let mesh = self.build_mesh(&pose);
            pubs.push(self.publish(stamp_ns, Payload::MeshChunk(mesh)));
            let points = self.grid.centroids().into_iter().map(|c| Vec3f::new(c.x as f32, c.y as f32, c.z as f32)).collect();
            pubs.push(self.publish(stamp_ns, Payload::PointCloudChunk { points }));
        }

        self.counters.frames_processed += 1;
        self.latency_total += started.elapsed();
        pubs
    }

    fn build_mesh(&self, pose: &Pose) -> SurfaceMesh<f32> {
        // Snap the region to the mesh lattice so consecutive meshes share vertices.
        let c = self.cfg.mesh.cell;
        let (x, y) = ((pose.translation.x / c).round() * c, (pose.translation.y / c).round() * c);
        let h = self.cfg.mesh.roi_half;
        let roi = Roi { x_min: x - h, x_max: x + h, y_min: y - h, y_max: y + h };
        let m = build_heightmap_mesh(&self.grid, &roi, c, self.mesh_generation);
        SurfaceMesh {
            vertices: m.vertices.iter().map(|v| Vec3f::new(v.x as f32, v.y as f32, v.z as f32)).collect(),
            triangles: m.triangles,
            generation: m.generation,
        }
    }

    fn estimate(&self) -> RoverState {
        self.latest_pose().map(|p| RoverState::from_pose(&p)).unwrap_or_default()
    }

    /// Gates `cmd`, records the status, and emits both.
    fn evaluate(&mut self, cmd: TwistCommand, now_ns: u64) -> Output {
        let confirmed = self.tracker.confirmed();
        let (gated, mut status) = safety_gate(&cmd, &confirmed, &self.estimate(), &self.cfg.safety);
        let forwarded = if self.cfg.safety_enabled {
            gated
        } else {
            if status.state == SafetyState::Blocked {
                status.state = SafetyState::Warning;
            }
            cmd
        };
        if status.state == SafetyState::Blocked {
            self.counters.blocked_statuses += 1;
        }
        self.status = status;
        let mut out = Output::default();
        let fwd = self.publish(now_ns, Payload::TwistCommand(TwistRecord::from(&forwarded)));
        out.to_rover.push(fwd);
        let st = self.publish(now_ns, Payload::SafetyStatus(status));
        out.to_console.push(st);
        out
    }

    /// Clamps, gates and forwards an operator command.
    pub fn on_console_command(&mut self, cmd: TwistCommand, now_ns: u64) -> Output {
        if !cmd.is_finite() {
            self.counters.malformed_commands += 1;
            return Output::default();
        }
        let (v, omega) = self.cfg.limits.clamp(cmd.v, cmd.omega);
        let cmd = TwistCommand { v, omega, ..cmd };
        self.latest_cmd = Some(cmd);
        self.last_cmd_ns = Some(now_ns);
        self.evaluate(cmd, now_ns)
    }

    /// Periodic step: watchdog first, then re-gating of the standing command
    /// against the latest pose and landmarks.
    pub fn on_tick(&mut self, now_ns: u64) -> Output {
        let mut out = Output::default();
        let Some(last) = self.last_cmd_ns else { return out };
        if self.latest_cmd.is_none() {
            return out;
        }
        if let Some(stop) = watchdog(last, now_ns, self.cfg.safety.watchdog_timeout_ms) {
            self.latest_cmd = None;
            self.counters.watchdog_stops += 1;
            self.status = SafetyStatus::stale(self.cfg.safety.horizon);
            let fwd = self.publish(now_ns, Payload::TwistCommand(TwistRecord::from(&stop)));
            out.to_rover.push(fwd);
            let st = self.publish(now_ns, Payload::SafetyStatus(self.status));
            out.to_console.push(st);
            return out;
        }
        let cmd = self.latest_cmd.expect("checked above");
        out.extend(self.evaluate(cmd, now_ns));
        out
    }

    /// Number of messages published so far on a topic.
    pub fn published(&self, t: MsgType) -> u32 {
        self.seqs[t.code() as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rvops_core::safety::CommandSource;

    fn cmd(v: f64, omega: f64) -> TwistCommand {
        TwistCommand { v, omega, stamp_ns: 0, source: CommandSource::Console }
    }

    #[test]
    fn clear_field_forwards_unchanged() {
        let mut p = Pipeline::new(PipelineConfig::default());
        p.on_pose(0, Pose::identity());
        let out = p.on_console_command(cmd(0.3, 0.0), 0);
        assert_eq!(out.forwarded().unwrap().v, 0.3);
        assert_eq!(out.statuses().next().unwrap().state, SafetyState::Clear);
    }

    #[test]
    fn commands_are_clamped() {
        let mut p = Pipeline::new(PipelineConfig::default());
        let f = p.on_console_command(cmd(3.0, -9.0), 0).forwarded().unwrap();
        assert_eq!((f.v, f.omega), (0.5, -1.0));
    }

    #[test]
    fn malformed_command_dropped() {
        let mut p = Pipeline::new(PipelineConfig::default());
        assert_eq!(p.on_console_command(cmd(f64::NAN, 0.0), 0), Output::default());
        assert_eq!(p.counters().malformed_commands, 1);
    }

    #[test]
    fn watchdog_fires_once_after_gap() {
        let mut p = Pipeline::new(PipelineConfig::default());
        p.on_console_command(cmd(0.3, 0.0), 0);
        assert_eq!(p.on_tick(500_000_000).forwarded().unwrap().v, 0.3);
        let out = p.on_tick(600_000_000);
        let stop = out.forwarded().unwrap();
        assert_eq!((stop.v, stop.omega, stop.source), (0.0, 0.0, CommandSource::Safety));
        assert_eq!(out.statuses().next().unwrap().state, SafetyState::StaleCommand);
        assert!(p.on_tick(700_000_000).to_rover.is_empty());
        assert_eq!(p.counters().watchdog_stops, 1);
    }

    #[test]
    fn stale_pose_skips_frame() {
        let mut p = Pipeline::new(PipelineConfig::default());
        p.on_pose(0, Pose::identity());
        let depth = DepthImage { width: 320, height: 240, data: vec![0; 320 * 240] };
        assert!(p.on_depth_frame(1, 300_000_000, depth, None).is_empty());
        assert_eq!(p.counters().frames_skipped, 1);
    }

    #[test]
    fn per_topic_sequences_start_at_one() {
        let mut p = Pipeline::new(PipelineConfig::default());
        let a = p.on_console_command(cmd(0.1, 0.0), 0);
        let b = p.on_console_command(cmd(0.1, 0.0), 1);
        assert_eq!((a.to_rover[0].seq, a.to_console[0].seq), (1, 1));
        assert_eq!((b.to_rover[0].seq, b.to_console[0].seq), (2, 2));
    }
}
