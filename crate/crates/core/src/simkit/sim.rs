use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_collision, mix_seed, render_rgbd, step_rover, DepthFrame, FrameStamp, OdomNoise,
    Odometry, RenderConfig, RgbFrame, RoverLimits, RoverState, Scene, SimError,
};
use crate::safety::TwistCommand;
use crate::{CameraIntrinsics, CameraMount, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub tick_s: f64,
    /// A frame pair is rendered every this many ticks.
    pub frame_every: u32,
    pub limits: RoverLimits,
    pub odom_noise: OdomNoise,
    pub render: RenderConfig,
    pub intrinsics: CameraIntrinsics,
    pub mount: CameraMount,
    pub rover_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            tick_s: 0.05,
            frame_every: 4,
            limits: RoverLimits::default(),
            odom_noise: OdomNoise::default(),
            render: RenderConfig::default(),
            intrinsics: CameraIntrinsics::default_rgbd(),
            mount: CameraMount::default(),
            rover_radius: 0.25,
        }
    }
}

/// Everything the simulator emits for one tick.
#[derive(Debug, Clone)]
pub struct SimTick {
    pub tick: u64,
    pub stamp_ns: u64,
    pub truth: RoverState,
    /// Odometry-integrated estimate of the body pose.
    pub pose_estimate: Pose,
    /// Rocks currently in contact with the rover body.
    pub contacts: Vec<usize>,
    /// Rocks that came into contact during this tick.
    pub new_collisions: Vec<usize>,
    pub frames: Option<(RgbFrame, DepthFrame)>,
}

/// Single-owner simulation loop.
pub struct Simulator {
    scene: Scene,
    cfg: SimConfig,
    truth: RoverState,
    odom: Odometry,
    rng: ChaCha8Rng,
    tick: u64,
    frame_seq: u32,
    contacts: Vec<usize>,
}

impl Simulator {
    pub fn new(scene: Scene, cfg: SimConfig) -> Result<Self, SimError> {
        scene.validate()?;
        if !(cfg.tick_s > 0.0) {
            return Err(SimError::NonPositiveDt(cfg.tick_s));
        }
        let truth = RoverState::default();
        let rng = ChaCha8Rng::seed_from_u64(mix_seed(scene.seed, 0x0D0));
        let contacts = check_collision(&scene, &truth, cfg.rover_radius);
        Ok(Self { scene, cfg, truth, odom: Odometry::starting_at(&truth), rng, tick: 0, frame_seq: 0, contacts })
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn truth(&self) -> &RoverState {
        &self.truth
    }

    pub fn tick_index(&self) -> u64 {
        self.tick
    }

    pub fn stamp_ns(&self) -> u64 {
        self.tick * (self.cfg.tick_s * 1e9).round() as u64
    }

    /// Body pose in the world; height follows the terrain, no pitch/roll.
    pub fn body_pose(&self, st: &RoverState) -> Pose {
        Pose::from_xy_yaw(st.x, st.y, self.scene.terrain_height(st.x, st.y), st.theta)
    }

    pub fn estimated_pose(&self) -> Pose {
        // Height is taken at the true position; odometry only covers the plane.
        let z = self.scene.terrain_height(self.truth.x, self.truth.y);
        Pose::from_xy_yaw(self.odom.x, self.odom.y, z, self.odom.theta)
    }

    pub fn camera_pose(&self) -> Pose {
        self.cfg.mount.camera_in_world(&self.body_pose(&self.truth))
    }

    /// Renders the current view and advances the frame counter.
    pub fn render(&mut self) -> (RgbFrame, DepthFrame) {
        self.frame_seq += 1;
        let stamp = FrameStamp { seq: self.frame_seq, stamp_ns: self.stamp_ns() };
        render_rgbd(&self.scene, &self.camera_pose(), &self.cfg.intrinsics, &self.cfg.render, stamp)
    }

    /// Applies `cmd` for one tick.
    pub fn step(&mut self, cmd: &TwistCommand) -> SimTick {
        let dt = self.cfg.tick_s;
        let (next, delta) =
            step_rover(&self.truth, cmd, dt, &self.cfg.limits, &self.cfg.odom_noise, &mut self.rng)
                .expect("tick length validated at construction");
        self.truth = next;
        self.odom.integrate(delta, dt);
        self.tick += 1;

        let contacts = check_collision(&self.scene, &self.truth, self.cfg.rover_radius);
        let new_collisions = contacts.iter().copied().filter(|i| !self.contacts.contains(i)).collect();
        self.contacts = contacts.clone();

        let frames = (self.tick % self.cfg.frame_every.max(1) as u64 == 0).then(|| self.render());
        SimTick {
            tick: self.tick,
            stamp_ns: self.stamp_ns(),
            truth: self.truth,
            pose_estimate: self.estimated_pose(),
            contacts,
            new_collisions,
            frames,
        }
    }
}
