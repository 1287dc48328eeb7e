use rvops_core::mapping::RockLandmark;
use rvops_core::perception::Detection;
use rvops_core::safety::{CommandSource, SafetyStatus, TwistCommand};
use rvops_core::{Pose, SurfaceMeshf, Vec3, Vec3f};
use serde::{Deserialize, Serialize};

use crate::json::{b64_bytes, b64_u16};

/// Message type codes as they appear on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum MsgType {
    Hello = 1,
    Subscribe = 2,
    RgbFrame = 3,
    DepthFrame = 4,
    PoseEstimate = 5,
    DetectionSet = 6,
    LandmarkSet = 7,
    PointCloudChunk = 8,
    MeshChunk = 9,
    TwistCommand = 10,
    SafetyStatus = 11,
    Heartbeat = 12,
    MetricsReport = 13,
}

impl MsgType {
    pub const ALL: [MsgType; 13] = [
        MsgType::Hello,
        MsgType::Subscribe,
        MsgType::RgbFrame,
        MsgType::DepthFrame,
        MsgType::PoseEstimate,
        MsgType::DetectionSet,
        MsgType::LandmarkSet,
        MsgType::PointCloudChunk,
        MsgType::MeshChunk,
        MsgType::TwistCommand,
        MsgType::SafetyStatus,
        MsgType::Heartbeat,
        MsgType::MetricsReport,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get((c as usize).wrapping_sub(1)).copied()
    }

    /// Bit of this type in a `Subscribe` mask.
    pub fn mask_bit(self) -> u16 {
        1 << (self.code() - 1)
    }

    pub fn name(self) -> &'static str {
        match self {
            MsgType::Hello => "Hello",
            MsgType::Subscribe => "Subscribe",
            MsgType::RgbFrame => "RgbFrame",
            MsgType::DepthFrame => "DepthFrame",
            MsgType::PoseEstimate => "PoseEstimate",
            MsgType::DetectionSet => "DetectionSet",
            MsgType::LandmarkSet => "LandmarkSet",
            MsgType::PointCloudChunk => "PointCloudChunk",
            MsgType::MeshChunk => "MeshChunk",
            MsgType::TwistCommand => "TwistCommand",
            MsgType::SafetyStatus => "SafetyStatus",
            MsgType::Heartbeat => "Heartbeat",
            MsgType::MetricsReport => "MetricsReport",
        }
    }
}

/// Builds a `Subscribe` mask from a list of types.
pub fn subscribe_mask(types: &[MsgType]) -> u16 {
    types.iter().fold(0, |m, t| m | t.mask_bit())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Rover,
    Ground,
    Console,
}

impl Role {
    pub fn code(self) -> u8 {
        match self {
            Role::Rover => 1,
            Role::Ground => 2,
            Role::Console => 3,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            1 => Some(Role::Rover),
            2 => Some(Role::Ground),
            3 => Some(Role::Console),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hello {
    pub role: Role,
    pub version: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RgbImage {
    pub width: u16,
    pub height: u16,
    #[serde(with = "b64_bytes")]
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepthImage {
    pub width: u16,
    pub height: u16,
    /// Little-endian u16 samples, base64 in JSON.
    #[serde(with = "b64_u16")]
    pub data: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRecord {
    pub id: u32,
    pub position: Vec3,
    pub radius: f64,
    pub hits: u32,
    pub confirmed: bool,
}

impl From<&RockLandmark> for LandmarkRecord {
    fn from(l: &RockLandmark) -> Self {
        Self { id: l.id, position: l.position, radius: l.radius, hits: l.hits, confirmed: l.confirmed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistRecord {
    pub v: f64,
    pub omega: f64,
    pub source: CommandSource,
}

impl TwistRecord {
    pub fn to_command(self, stamp_ns: u64) -> TwistCommand {
        TwistCommand { v: self.v, omega: self.omega, stamp_ns, source: self.source }
    }
}

impl From<&TwistCommand> for TwistRecord {
    fn from(c: &TwistCommand) -> Self {
        Self { v: c.v, omega: c.omega, source: c.source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub elapsed_s: f64,
    pub collisions: u32,
    pub min_clearance_m: f64,
    pub distance_m: f64,
    pub completed: bool,
}

/// Typed payload; the variant fixes the message type. In JSON the variant
/// name is the `type` field and the record's fields sit beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum Payload {
    Hello(Hello),
    Subscribe { mask: u16 },
    RgbFrame(RgbImage),
    DepthFrame(DepthImage),
    PoseEstimate { pose: Pose },
    DetectionSet { detections: Vec<Detection> },
    LandmarkSet { landmarks: Vec<LandmarkRecord> },
    PointCloudChunk { points: Vec<Vec3f> },
    MeshChunk(SurfaceMeshf),
    TwistCommand(TwistRecord),
    SafetyStatus(SafetyStatus),
    Heartbeat,
    MetricsReport(MetricsRecord),
}

impl Payload {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Payload::Hello(_) => MsgType::Hello,
            Payload::Subscribe { .. } => MsgType::Subscribe,
            Payload::RgbFrame(_) => MsgType::RgbFrame,
            Payload::DepthFrame(_) => MsgType::DepthFrame,
            Payload::PoseEstimate { .. } => MsgType::PoseEstimate,
            Payload::DetectionSet { .. } => MsgType::DetectionSet,
            Payload::LandmarkSet { .. } => MsgType::LandmarkSet,
            Payload::PointCloudChunk { .. } => MsgType::PointCloudChunk,
            Payload::MeshChunk(_) => MsgType::MeshChunk,
            Payload::TwistCommand(_) => MsgType::TwistCommand,
            Payload::SafetyStatus(_) => MsgType::SafetyStatus,
            Payload::Heartbeat => MsgType::Heartbeat,
            Payload::MetricsReport(_) => MsgType::MetricsReport,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireMessage {
    pub seq: u32,
    pub stamp_ns: u64,
    #[serde(flatten)]
    pub payload: Payload,
}

impl WireMessage {
    pub fn new(seq: u32, stamp_ns: u64, payload: Payload) -> Self {
        Self { seq, stamp_ns, payload }
    }

    pub fn msg_type(&self) -> MsgType {
        self.payload.msg_type()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for t in MsgType::ALL {
            assert_eq!(MsgType::from_code(t.code()), Some(t));
        }
        assert_eq!(MsgType::from_code(0), None);
        assert_eq!(MsgType::from_code(14), None);
        for r in [Role::Rover, Role::Ground, Role::Console] {
            assert_eq!(Role::from_code(r.code()), Some(r));
        }
    }

    #[test]
    fn mask_bits() {
        assert_eq!(MsgType::Hello.mask_bit(), 1);
        assert_eq!(MsgType::MetricsReport.mask_bit(), 1 << 12);
        assert_eq!(subscribe_mask(&[MsgType::RgbFrame, MsgType::SafetyStatus]), 0b100_0000_0100);
    }
}
