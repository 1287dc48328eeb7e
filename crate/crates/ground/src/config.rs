use std::path::Path;

use rvops_core::mapping::TrackerParams;
use rvops_core::perception::DetectorParams;
use rvops_core::safety::SafetyParams;
use rvops_core::simkit::RoverLimits;
use rvops_core::{CameraIntrinsics, CameraMount};
use serde::{Deserialize, Serialize};

use crate::GroundError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Half side of the square mesh region around the rover, meters.
    pub roi_half: f64,
    pub cell: f64,
    /// Rebuild the mesh every this many processed frames.
    pub regen_every: u32,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { roi_half: 5.0, cell: 0.2, regen_every: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detector: DetectorParams,
    pub tracker: TrackerParams,
    pub voxel_size: f64,
    pub mesh: MeshConfig,
    pub safety: SafetyParams,
    /// Whether forward commands are gated; the watchdog runs regardless.
    pub safety_enabled: bool,
    pub limits: RoverLimits,
    pub intrinsics: CameraIntrinsics,
    pub mount: CameraMount,
    /// Maximum frame-to-pose timestamp gap for pairing, milliseconds.
    pub pose_pairing_ms: u64,
    pub rover_port: u16,
    pub ws_port: u16,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detector: DetectorParams::default(),
            tracker: TrackerParams::default(),
            voxel_size: 0.05,
            mesh: MeshConfig::default(),
            safety: SafetyParams::default(),
            safety_enabled: true,
            limits: RoverLimits::default(),
            intrinsics: CameraIntrinsics::default_rgbd(),
            mount: CameraMount::default(),
            pose_pairing_ms: 200,
            rover_port: 7401,
            ws_port: 7402,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), GroundError> {
        self.detector.validate().map_err(|e| GroundError::Config(e.to_string()))?;
        let checks = [
            (self.tracker.gate > 0.0, "tracker gate must be positive"),
            (self.tracker.confirm_hits >= 1, "confirm_hits must be at least 1"),
            (self.voxel_size > 0.0, "voxel size must be positive"),
            (self.mesh.cell > 0.0 && self.mesh.roi_half > 0.0, "mesh cell and roi must be positive"),
            (self.mesh.regen_every >= 1, "mesh regen interval must be at least 1"),
            (self.safety.horizon > 0.0 && self.safety.step > 0.0, "safety horizon and step must be positive"),
            (self.safety.watchdog_timeout_ms > 0, "watchdog timeout must be positive"),
            (self.limits.v_max >= 0.0 && self.limits.omega_max >= 0.0, "limits must be non-negative"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(GroundError::Config((*msg).into())),
            None => Ok(()),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, GroundError> {
        let cfg: Self = toml::from_str(text).map_err(|e| GroundError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, GroundError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = PipelineConfig::from_toml("voxel_size = 0.1\n[mesh]\nregen_every = 2\n").unwrap();
        assert_eq!(c.voxel_size, 0.1);
        assert_eq!(c.mesh.regen_every, 2);
        assert_eq!(c.mesh.cell, MeshConfig::default().cell);
    }

    #[test]
    fn zero_regen_interval_rejected() {
        assert!(PipelineConfig::from_toml("[mesh]\nregen_every = 0\n").is_err());
        assert!(PipelineConfig::from_toml("voxel_size = -1.0\n").is_err());
        assert!(PipelineConfig::from_toml("no_such_key = 1\n").is_err());
    }
}
