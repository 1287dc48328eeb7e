use serde::{Deserialize, Serialize};

use super::{
    above_plane_mask, connected_components, fit_ground_plane_ransac, frame_to_points,
    DetectorParams, PerceptionError, Plane,
};
use crate::simkit::DepthFrame;
use crate::{CameraIntrinsics, Pose, Vec3};

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: u16,
    pub v_min: u16,
    pub u_max: u16,
    pub v_max: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    /// Number of stride-grid pixels in the component.
    pub pixel_count: u32,
    pub centroid_world: Vec3,
    pub radius_est: f64,
    pub confidence: f64,
    pub frame_seq: u32,
}

/// Result of running a detector on one frame. `plane` is `None` when no
/// ground was visible, in which case `detections` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionOutcome {
    pub detections: Vec<Detection>,
    pub plane: Option<Plane<f64>>,
}

impl DetectionOutcome {
    pub fn no_ground(&self) -> bool {
        self.plane.is_none()
    }
}

/// Frame in, detections out.
pub trait Detector {
    fn detect(&self, depth: &DepthFrame, k: &CameraIntrinsics, cam_pose_world: &Pose, seed: u64) -> DetectionOutcome;
}

/// Above-ground-plane blob detector.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GeometricDetector {
    pub params: DetectorParams,
}

impl Detector for GeometricDetector {
    fn detect(&self, depth: &DepthFrame, k: &CameraIntrinsics, cam_pose_world: &Pose, seed: u64) -> DetectionOutcome {
        match detect_rocks(depth, k, cam_pose_world, &self.params, seed) {
            Ok((detections, plane)) => DetectionOutcome { detections, plane: Some(plane) },
            Err(_) => DetectionOutcome { detections: Vec::new(), plane: None },
        }
    }
}

/// Lower-middle element after sorting.
fn lower_median(mut xs: Vec<f64>) -> f64 {
    xs.sort_unstable_by(f64::total_cmp);
    xs[(xs.len() - 1) / 2]
}

const MIN_RADIUS: f64 = 0.05;

/// Detects rocks standing on the ground plane.
///
/// Each surviving component yields one detection. Its horizontal position
/// is the center of a sphere of the estimated radius resting on the plane,
/// found by pushing the per-axis median of the member points away from the
/// camera along the horizontal viewing direction (median over per-point
/// solutions). Its vertical position sits at the median member height above
/// the plane.
pub fn detect_rocks(
    depth: &DepthFrame,
    k: &CameraIntrinsics,
    cam_pose_world: &Pose,
    p: &DetectorParams,
    seed: u64,
) -> Result<(Vec<Detection>, Plane<f64>), PerceptionError> {
    p.validate()?;
    let points = frame_to_points(depth, k, cam_pose_world, p.stride);
    let world: Vec<Vec3> = points.iter().map(|pp| pp.world).collect();
    let plane = fit_ground_plane_ransac(&world, p, seed)?;
    let mask = above_plane_mask(&points, &plane, p.h_min, depth.width, depth.height, p.stride);

    // Stride-grid cell -> point index.
    let mut lookup = vec![u32::MAX; (mask.cols * mask.rows) as usize];
    for (i, pp) in points.iter().enumerate() {
        lookup[((pp.v / p.stride) * mask.cols + pp.u / p.stride) as usize] = i as u32;
    }

    let area = (p.stride * p.stride) as u64;
    let cam = cam_pose_world.translation;
    let mut detections = Vec::new();
    for comp in connected_components(&mask, p.connectivity) {
        let n = comp.len() as u64;
        if n * area < p.min_component_px as u64 {
            continue;
        }
        let members: Vec<Vec3> = comp
            .iter()
            .map(|&(u, v)| world[lookup[((v / p.stride) * mask.cols + u / p.stride) as usize] as usize])
            .collect();

        let mut bbox = BBox { u_min: u16::MAX, v_min: u16::MAX, u_max: 0, v_max: 0 };
        for &(u, v) in &comp {
            let (u, v) = (u.min(u16::MAX as u32) as u16, v.min(u16::MAX as u32) as u16);
            bbox.u_min = bbox.u_min.min(u);
            bbox.v_min = bbox.v_min.min(v);
            bbox.u_max = bbox.u_max.max(u);
            bbox.v_max = bbox.v_max.max(v);
        }

        let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for m in &members {
            x_lo = x_lo.min(m.x);
            x_hi = x_hi.max(m.x);
            y_lo = y_lo.min(m.y);
            y_hi = y_hi.max(m.y);
        }
        let half_extent = 0.5 * (x_hi - x_lo).max(y_hi - y_lo);
        let radius_est = half_extent.max(MIN_RADIUS);

        let mx = lower_median(members.iter().map(|m| m.x).collect());
        let my = lower_median(members.iter().map(|m| m.y).collect());
        let heights: Vec<f64> = members.iter().map(|m| plane.signed_distance(*m)).collect();
        let h_med = lower_median(heights.clone());

        // The widest slice inside the mask lies at height h_min, so the
        // sphere radius is recovered from the half extent at that height.
        let r_fit = (half_extent * half_extent + p.h_min * p.h_min).sqrt();
        let (dx, dy) = (mx - cam.x, my - cam.y);
        let dn = dx.hypot(dy);
        let (cx, cy) = if dn > 1e-9 {
            let (hx, hy) = (dx / dn, dy / dn);
            let shifts: Vec<f64> = members
                .iter()
                .zip(&heights)
                .map(|(m, h)| {
                    let (qx, qy) = (m.x - mx, m.y - my);
                    let a = qx * hx + qy * hy;
                    let b2 = (qx * qx + qy * qy - a * a).max(0.0);
                    a + (r_fit * r_fit - b2 - h * h).max(0.0).sqrt()
                })
                .collect();
            let s = lower_median(shifts);
            (mx + s * hx, my + s * hy)
        } else {
            (mx, my)
        };

        detections.push(Detection {
            bbox,
            pixel_count: n as u32,
            centroid_world: plane.point_at(cx, cy, h_med),
            radius_est,
            confidence: ((n * area) as f64 / p.confidence_ref_px as f64).min(1.0),
            frame_seq: depth.seq,
        });
    }
    detections.sort_by_key(|d| std::cmp::Reverse(d.pixel_count));
    Ok((detections, plane))
}
