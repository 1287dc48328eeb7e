//! Deterministic stand-in for the rover and its terrain: scene model,
//! differential-drive dynamics with odometry noise, synthetic RGBD
//! rendering and ground-truth collision checks.

mod render;
mod rover;
mod scene;
mod sim;

use thiserror::Error;

pub use render::{
    cast_ray, pixel_surfaces, render_depth, render_rgb, render_rgbd, RayHit, RenderConfig,
    Surface, ROCK_ALBEDO, TERRAIN_ALBEDO,
};
pub use rover::{check_collision, step_rover, OdomDelta, OdomNoise, Odometry, RoverLimits, RoverState};
pub use scene::{generate_scene, Heightmap, Rock, Scene, SceneParams};
pub use sim::{SimConfig, SimTick, Simulator};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("could not place {requested} rocks after 10000 samples ({placed} placed)")]
    InfeasiblePlacement { placed: usize, requested: usize },
    #[error("invalid scene parameters: {0}")]
    InvalidParams(&'static str),
}

/// Timestamp pair attached to every emitted sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameStamp {
    pub seq: u32,
    pub stamp_ns: u64,
}

/// Row-major depth image; 0 marks an invalid pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthFrame {
    pub seq: u32,
    pub stamp_ns: u64,
    pub width: u32,
    pub height: u32,
    pub data: Vec<u16>,
}

impl DepthFrame {
    pub fn at(&self, u: u32, v: u32) -> u16 {
        self.data[(v * self.width + u) as usize]
    }
}

/// Row-major packed RGB8 image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    pub seq: u32,
    pub stamp_ns: u64,
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbFrame {
    pub fn at(&self, u: u32, v: u32) -> [u8; 3] {
        let i = 3 * (v * self.width + u) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Mixes two 64-bit words into a seed (splitmix64 finalizer).
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
