//! Rock detection from a single depth frame and a camera pose: back-project
//! to world points, fit the ground plane, segment everything standing above
//! it and turn connected blobs into located detections.

mod components;
mod detect;
mod plane;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use components::{above_plane_mask, connected_components, Component, StrideMask};
pub use detect::{detect_rocks, BBox, Detection, DetectionOutcome, Detector, GeometricDetector};
pub use plane::{
    fit_ground_plane_ransac, fit_plane_detailed, refine_plane, symmetric_eigen3, Plane, PlaneFit,
};

use crate::simkit::DepthFrame;
use crate::{CameraIntrinsics, Pose, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("plane fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("no visible ground: best inlier fraction {inlier_fraction:.3}")]
    NoGround { inlier_fraction: f64 },
    #[error("invalid detector parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub ransac_iters: u32,
    pub inlier_tau: f64,
    pub min_inlier_frac: f64,
    pub h_min: f64,
    pub stride: u32,
    pub connectivity: u8,
    pub min_component_px: u32,
    pub confidence_ref_px: u32,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            ransac_iters: 200,
            inlier_tau: 0.02,
            min_inlier_frac: 0.3,
            h_min: 0.05,
            stride: 2,
            connectivity: 8,
            min_component_px: 30,
            confidence_ref_px: 300,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if self.ransac_iters == 0
            || !(self.inlier_tau > 0.0)
            || !(self.min_inlier_frac > 0.0)
            || !(self.h_min > 0.0)
            || self.stride == 0
            || self.min_component_px == 0
            || self.confidence_ref_px == 0
        {
            return Err(PerceptionError::InvalidParams("all detector parameters must be positive"));
        }
        if !matches!(self.connectivity, 4 | 8) {
            return Err(PerceptionError::InvalidParams("connectivity must be 4 or 8"));
        }
        Ok(())
    }
}

/// A valid depth pixel and its world-frame point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: u32,
    pub v: u32,
    pub world: Vec3,
}

/// Back-projects every valid pixel on the stride grid into the world frame.
pub fn frame_to_points(depth: &DepthFrame, k: &CameraIntrinsics, cam_pose_world: &Pose, stride: u32) -> Vec<PixelPoint> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    for v in (0..depth.height).step_by(stride as usize) {
        for u in (0..depth.width).step_by(stride as usize) {
            let raw = depth.at(u, v);
            if raw == 0 {
                continue;
            }
            let z = raw as f64 * k.depth_scale;
            let p_cam = k.back_project(u as f64, v as f64, z).expect("positive depth");
            out.push(PixelPoint { u, v, world: cam_pose_world.transform_point(p_cam) });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(w: u32, h: u32, data: Vec<u16>) -> DepthFrame {
        DepthFrame { seq: 1, stamp_ns: 0, width: w, height: h, data }
    }

    #[test]
    fn empty_frame_has_no_points() {
        let k = CameraIntrinsics::default_rgbd();
        let f = frame(320, 240, vec![0; 320 * 240]);
        assert!(frame_to_points(&f, &k, &Pose::identity(), 2).is_empty());
    }

    #[test]
    fn principal_point_pixel() {
        let k = CameraIntrinsics::default_rgbd();
        let mut data = vec![0; 320 * 240];
        data[120 * 320 + 160] = 2000;
        let pts = frame_to_points(&frame(320, 240, data), &k, &Pose::identity(), 2);
        assert_eq!(pts.len(), 1);
        assert_eq!((pts[0].u, pts[0].v), (160, 120));
        assert!((pts[0].world - Vec3::new(0.0, 0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn point_count_matches_enumeration() {
        let k = CameraIntrinsics::new(10.0, 10.0, 4.0, 3.0, 9, 7, 0.001).unwrap();
        let data: Vec<u16> = (0..63u32).map(|i| if (i * 7919) % 3 == 0 { 0 } else { 1000 + i as u16 }).collect();
        let f = frame(9, 7, data.clone());
        for stride in 1..4u32 {
            let mut expected = 0;
            for v in 0..7u32 {
                for u in 0..9u32 {
                    if u % stride == 0 && v % stride == 0 && data[(v * 9 + u) as usize] != 0 {
                        expected += 1;
                    }
                }
            }
            assert_eq!(frame_to_points(&f, &k, &Pose::identity(), stride).len(), expected);
        }
    }

    #[test]
    fn params_validation() {
        DetectorParams::default().validate().unwrap();
        assert!(DetectorParams { connectivity: 6, ..Default::default() }.validate().is_err());
        assert!(DetectorParams { stride: 0, ..Default::default() }.validate().is_err());
    }
}
