//! Seeded random messages for codec tests and the self-test.

use rand::Rng;
use rvops_core::mapping::SurfaceMesh;
use rvops_core::perception::{BBox, Detection};
use rvops_core::safety::{CommandSource, SafetyState, SafetyStatus};
use rvops_core::{Pose, Quat, Vec3, Vec3f};

use crate::message::{
    DepthImage, Hello, LandmarkRecord, MetricsRecord, MsgType, Payload, RgbImage, Role, TwistRecord,
    WireMessage,
};

fn f64_in<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(-1e3..1e3)
}

fn vec3<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    Vec3::new(f64_in(rng), f64_in(rng), f64_in(rng))
}

fn vec3f<R: Rng + ?Sized>(rng: &mut R) -> Vec3f {
    Vec3f::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-5.0..5.0))
}

fn count<R: Rng + ?Sized>(rng: &mut R, max: usize) -> usize {
    // Empty collections are a regular case, not a rare one.
    if rng.random_bool(0.15) {
        0
    } else {
        rng.random_range(1..=max)
    }
}

pub fn random_payload<R: Rng + ?Sized>(rng: &mut R, t: MsgType) -> Payload {
    match t {
        MsgType::Hello => {
            let role = [Role::Rover, Role::Ground, Role::Console][rng.random_range(0..3)];
            Payload::Hello(Hello { role, version: rng.random() })
        }
        MsgType::Subscribe => Payload::Subscribe { mask: rng.random() },
        MsgType::RgbFrame => {
            let (width, height) = (rng.random_range(0..24u16), rng.random_range(0..16u16));
            let data = (0..width as usize * height as usize * 3).map(|_| rng.random()).collect();
            Payload::RgbFrame(RgbImage { width, height, data })
        }
        MsgType::DepthFrame => {
            let (width, height) = (rng.random_range(0..24u16), rng.random_range(0..16u16));
            let data = (0..width as usize * height as usize).map(|_| rng.random()).collect();
            Payload::DepthFrame(DepthImage { width, height, data })
        }
        MsgType::PoseEstimate => {
            let rotation = Quat::new(f64_in(rng), f64_in(rng), f64_in(rng), f64_in(rng));
            Payload::PoseEstimate { pose: Pose { rotation, translation: vec3(rng) } }
        }
        MsgType::DetectionSet => {
            let detections = (0..count(rng, 12))
                .map(|_| {
                    let (u0, v0) = (rng.random_range(0..300u16), rng.random_range(0..200u16));
                    Detection {
                        bbox: BBox { u_min: u0, v_min: v0, u_max: u0 + rng.random_range(0..20), v_max: v0 + rng.random_range(0..20) },
                        pixel_count: rng.random(),
                        centroid_world: vec3(rng),
                        radius_est: rng.random_range(0.05..1.0),
                        confidence: rng.random_range(0.0..=1.0),
                        frame_seq: rng.random(),
                    }
                })
                .collect();
            Payload::DetectionSet { detections }
        }
        MsgType::LandmarkSet => {
            let landmarks = (0..count(rng, 12))
                .map(|i| LandmarkRecord {
                    id: i as u32 + 1,
                    position: vec3(rng),
                    radius: rng.random_range(0.05..1.0),
                    hits: rng.random(),
                    confirmed: rng.random(),
                })
                .collect();
            Payload::LandmarkSet { landmarks }
        }
        MsgType::PointCloudChunk => Payload::PointCloudChunk { points: (0..count(rng, 200)).map(|_| vec3f(rng)).collect() },
        MsgType::MeshChunk => {
            let vertices: Vec<Vec3f> = (0..count(rng, 60)).map(|_| vec3f(rng)).collect();
            let n = vertices.len().max(1) as u32;
            let triangles = (0..count(rng, 80))
                .map(|_| [rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n)])
                .collect();
            Payload::MeshChunk(SurfaceMesh { vertices, triangles, generation: rng.random() })
        }
        MsgType::TwistCommand => {
            let source = [CommandSource::Console, CommandSource::Script, CommandSource::Safety][rng.random_range(0..3)];
            Payload::TwistCommand(TwistRecord { v: rng.random_range(-1.0..1.0), omega: rng.random_range(-2.0..2.0), source })
        }
        MsgType::SafetyStatus => {
            let state = [SafetyState::Clear, SafetyState::Warning, SafetyState::Blocked, SafetyState::StaleCommand][rng.random_range(0..4)];
            Payload::SafetyStatus(SafetyStatus {
                state,
                nearest_obstacle_id: rng.random_bool(0.7).then(|| rng.random_range(1..=u32::MAX)),
                clearance: rng.random_range(0.0..999.0),
                horizon: rng.random_range(0.1..5.0),
            })
        }
        MsgType::Heartbeat => Payload::Heartbeat,
        MsgType::MetricsReport => Payload::MetricsReport(MetricsRecord {
            elapsed_s: rng.random_range(0.0..1e4),
            collisions: rng.random(),
            min_clearance_m: rng.random_range(0.0..999.0),
            distance_m: rng.random_range(0.0..1e3),
            completed: rng.random(),
        }),
    }
}

pub fn random_message<R: Rng + ?Sized>(rng: &mut R, t: MsgType) -> WireMessage {
    WireMessage::new(rng.random(), rng.random(), random_payload(rng, t))
}

/// A message of a uniformly chosen type.
pub fn random_any<R: Rng + ?Sized>(rng: &mut R) -> WireMessage {
    let t = MsgType::ALL[rng.random_range(0..MsgType::ALL.len())];
    random_message(rng, t)
}
