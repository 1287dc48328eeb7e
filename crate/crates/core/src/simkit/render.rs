use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{mix_seed, DepthFrame, FrameStamp, RgbFrame, Scene};
use crate::{CameraIntrinsics, Pose, Vec3};

pub const TERRAIN_ALBEDO: f64 = 0.8;
pub const ROCK_ALBEDO: f64 = 0.45;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Standard deviation of additive depth noise, meters. Zero disables noise.
    pub depth_noise_sigma: f64,
    pub max_range: f64,
    pub march_step: f64,
    pub bisection_iters: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { depth_noise_sigma: 0.005, max_range: 10.0, march_step: 0.01, bisection_iters: 20 }
    }
}

impl RenderConfig {
    pub fn noiseless() -> Self {
        Self { depth_noise_sigma: 0.0, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Terrain,
    Rock(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Distance along the unit ray direction.
    pub range: f64,
    pub point: Vec3,
    pub normal: Vec3,
    pub surface: Surface,
}

/// Nearest intersection of the ray `origin + s * dir` (unit `dir`) with the
/// scene within `cfg.max_range`.
///
/// Rocks are intersected analytically as full spheres, keeping only hit
/// points on or above the terrain. Terrain is found by fixed-step marching
/// along the ray followed by bisection on the first sign change.
pub fn cast_ray(scene: &Scene, origin: Vec3, dir: Vec3, cfg: &RenderConfig) -> Option<RayHit> {
    let bounds = scene.heightmap.height_range();
    cast_ray_bounded(scene, bounds, origin, dir, cfg)
}

fn cast_ray_bounded(
    scene: &Scene,
    (_, h_hi): (f64, f64),
    origin: Vec3,
    dir: Vec3,
    cfg: &RenderConfig,
) -> Option<RayHit> {
    let mut best: Option<RayHit> = None;

    for (i, rock) in scene.rocks.iter().enumerate() {
        let c = rock.center();
        let oc = origin - c;
        let b = oc.dot(dir);
        let cc = oc.norm_squared() - rock.radius * rock.radius;
        let disc = b * b - cc;
        if disc < 0.0 {
            continue;
        }
        let sq = disc.sqrt();
        for s in [-b - sq, -b + sq] {
            if s <= 1e-9 || s > cfg.max_range {
                continue;
            }
            if best.is_some_and(|h| h.range <= s) {
                break;
            }
            let p = origin + dir * s;
            if p.z >= scene.terrain_height(p.x, p.y) {
                best = Some(RayHit {
                    range: s,
                    point: p,
                    normal: ((p - c) * (1.0 / rock.radius)).normalized(),
                    surface: Surface::Rock(i),
                });
                break;
            }
        }
    }

    let limit = best.map_or(cfg.max_range, |h| h.range);
    if let Some(s) = march_terrain(scene, h_hi, origin, dir, limit, cfg) {
        let p = origin + dir * s;
        best = Some(RayHit { range: s, point: p, normal: terrain_normal(scene, p.x, p.y), surface: Surface::Terrain });
    }
    best
}

fn march_terrain(
    scene: &Scene,
    h_hi: f64,
    o: Vec3,
    d: Vec3,
    limit: f64,
    cfg: &RenderConfig,
) -> Option<f64> {
    let f = |s: f64| {
        let p = o + d * s;
        p.z - scene.terrain_height(p.x, p.y)
    };
    let step = cfg.march_step;
    // Above every terrain node the ray cannot meet the surface, so marching
    // can start at the last grid step before the ray descends below the
    // highest node without changing the result.
    let mut k: u64 = 0;
    if o.z > h_hi {
        if d.z >= 0.0 {
            return None;
        }
        k = ((o.z - h_hi) / -d.z / step).floor() as u64;
    }
    let mut prev_s = k as f64 * step;
    if prev_s > limit {
        return None;
    }
    if f(prev_s) <= 0.0 {
        return if k == 0 { None } else { Some(prev_s) };
    }
    loop {
        k += 1;
        let s = k as f64 * step;
        if s > limit {
            return None;
        }
        let p_z = o.z + d.z * s;
        if p_z > h_hi && d.z >= 0.0 {
            return None;
        }
        if f(s) <= 0.0 {
            let (mut lo, mut hi) = (prev_s, s);
            for _ in 0..cfg.bisection_iters {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let hit = 0.5 * (lo + hi);
            return (hit <= limit).then_some(hit);
        }
        prev_s = s;
    }
}

fn terrain_normal(scene: &Scene, x: f64, y: f64) -> Vec3 {
    let e = scene.heightmap.cell;
    let dhdx = (scene.terrain_height(x + e, y) - scene.terrain_height(x - e, y)) / (2.0 * e);
    let dhdy = (scene.terrain_height(x, y + e) - scene.terrain_height(x, y - e)) / (2.0 * e);
    Vec3::new(-dhdx, -dhdy, 1.0).normalized()
}

struct PixelSample {
    depth: f64,
    hit: RayHit,
}

/// Casts the ray for every pixel; pixel `(u, v)` samples the ray through
/// image coordinates `(u, v)`.
fn cast_image(
    scene: &Scene,
    cam: &Pose,
    k: &CameraIntrinsics,
    cfg: &RenderConfig,
    stride: u32,
) -> Vec<Option<PixelSample>> {
    let bounds = scene.heightmap.height_range();
    let origin = cam.translation;
    let mut out = Vec::with_capacity((k.width * k.height) as usize);
    for v in 0..k.height {
        for u in 0..k.width {
            if u % stride != 0 || v % stride != 0 {
                out.push(None);
                continue;
            }
            let ray_cam = k.ray(u as f64, v as f64).normalized();
            let dir = cam.transform_vector(ray_cam);
            out.push(
                cast_ray_bounded(scene, bounds, origin, dir, cfg)
                    .map(|hit| PixelSample { depth: hit.range * ray_cam.z, hit }),
            );
        }
    }
    out
}

fn quantize_depths(
    scene: &Scene,
    samples: &[Option<PixelSample>],
    k: &CameraIntrinsics,
    cfg: &RenderConfig,
    stamp: FrameStamp,
) -> DepthFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(scene.seed, stamp.seq as u64));
    let noise = (cfg.depth_noise_sigma > 0.0)
        .then(|| Normal::new(0.0, cfg.depth_noise_sigma).expect("finite sigma"));
    let data = samples
        .iter()
        .map(|s| match s {
            None => 0,
            Some(s) => {
                let mut d = s.depth;
                if let Some(n) = &noise {
                    d += n.sample(&mut rng);
                }
                let d = d.clamp(0.0, cfg.max_range);
                (d / k.depth_scale).round().min(u16::MAX as f64) as u16
            }
        })
        .collect();
    DepthFrame { seq: stamp.seq, stamp_ns: stamp.stamp_ns, width: k.width, height: k.height, data }
}

fn shade(scene: &Scene, samples: &[Option<PixelSample>], k: &CameraIntrinsics, stamp: FrameStamp) -> RgbFrame {
    let mut data = Vec::with_capacity(samples.len() * 3);
    for s in samples {
        let value = match s {
            None => 0u8,
            Some(s) => {
                let albedo = match s.hit.surface {
                    Surface::Terrain => TERRAIN_ALBEDO,
                    Surface::Rock(_) => ROCK_ALBEDO,
                };
                let i = (albedo * s.hit.normal.dot(scene.sun_direction).max(0.0)).clamp(0.0, 1.0);
                (i * 255.0).round() as u8
            }
        };
        data.extend_from_slice(&[value, value, value]);
    }
    RgbFrame { seq: stamp.seq, stamp_ns: stamp.stamp_ns, width: k.width, height: k.height, data }
}

/// Synthetic depth image. Noise is drawn from a generator seeded by the
/// scene seed and the frame sequence number.
pub fn render_depth(
    scene: &Scene,
    cam_pose_world: &Pose,
    k: &CameraIntrinsics,
    cfg: &RenderConfig,
    stamp: FrameStamp,
) -> DepthFrame {
    let samples = cast_image(scene, cam_pose_world, k, cfg, 1);
    quantize_depths(scene, &samples, k, cfg, stamp)
}

/// Grayscale Lambert-shaded image replicated to RGB; sky pixels are black.
pub fn render_rgb(
    scene: &Scene,
    cam_pose_world: &Pose,
    k: &CameraIntrinsics,
    cfg: &RenderConfig,
    stamp: FrameStamp,
) -> RgbFrame {
    let samples = cast_image(scene, cam_pose_world, k, cfg, 1);
    shade(scene, &samples, k, stamp)
}

/// Both images from a single pass of ray casting.
pub fn render_rgbd(
    scene: &Scene,
    cam_pose_world: &Pose,
    k: &CameraIntrinsics,
    cfg: &RenderConfig,
    stamp: FrameStamp,
) -> (RgbFrame, DepthFrame) {
    let samples = cast_image(scene, cam_pose_world, k, cfg, 1);
    (shade(scene, &samples, k, stamp), quantize_depths(scene, &samples, k, cfg, stamp))
}

/// Ground-truth surface label per pixel on the stride grid (row-major over
/// the full image; off-grid pixels are `None`).
pub fn pixel_surfaces(
    scene: &Scene,
    cam_pose_world: &Pose,
    k: &CameraIntrinsics,
    cfg: &RenderConfig,
    stride: u32,
) -> Vec<Option<Surface>> {
    cast_image(scene, cam_pose_world, k, cfg, stride.max(1))
        .into_iter()
        .map(|s| s.map(|s| s.hit.surface))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{CameraMount, Quat};

    fn down_camera(height: f64) -> Pose {
        // Optical z pointing to world -z; image x along world x.
        let q = Quat::from_rotation_matrix([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]);
        Pose::new(q, Vec3::new(0.0, 0.0, height))
    }

    fn forward_camera(height: f64) -> Pose {
        let mount = CameraMount { height, pitch: 0.0 };
        mount.body_from_camera()
    }

    fn stamp(seq: u32) -> FrameStamp {
        FrameStamp { seq, stamp_ns: seq as u64 * 200_000_000 }
    }

    #[test]
    fn plumb_line_depth() {
        let scene = Scene::flat(5.0, 0.1, 1);
        let k = CameraIntrinsics::default_rgbd();
        let f = render_depth(&scene, &down_camera(1.0), &k, &RenderConfig::noiseless(), stamp(1));
        let d = f.at(160, 120) as f64 * k.depth_scale;
        assert!((d - 1.0).abs() <= 0.002, "{d}");
    }

    #[test]
    fn sphere_on_optical_axis() {
        let mut scene = Scene::flat(5.0, 0.1, 1);
        scene.rocks.push(super::super::Rock { x: 2.0, y: 0.0, z: 0.5, radius: 0.5 });
        let k = CameraIntrinsics::default_rgbd();
        let f = render_depth(&scene, &forward_camera(0.5), &k, &RenderConfig::noiseless(), stamp(1));
        let d = f.at(160, 120) as f64 * k.depth_scale;
        assert!((d - 1.5).abs() <= 0.0005 + 1e-12, "{d}");
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = super::super::generate_scene(4, &Default::default()).unwrap();
        let k = CameraIntrinsics::default_rgbd();
        let cam = CameraMount::default().camera_in_world(&Pose::identity());
        let cfg = RenderConfig::default();
        let a = render_rgbd(&scene, &cam, &k, &cfg, stamp(3));
        let b = render_rgbd(&scene, &cam, &k, &cfg, stamp(3));
        assert_eq!(a, b);
        assert_eq!(render_depth(&scene, &cam, &k, &cfg, stamp(3)), a.1);
        assert_eq!(render_rgb(&scene, &cam, &k, &cfg, stamp(3)), a.0);
        // Different frame sequence numbers get different noise.
        assert_ne!(render_depth(&scene, &cam, &k, &cfg, stamp(4)).data, a.1.data);
    }

    #[test]
    fn zenith_sun_on_flat_terrain() {
        let scene = Scene::flat(5.0, 0.1, 1);
        let k = CameraIntrinsics::default_rgbd();
        let f = render_rgb(&scene, &down_camera(1.0), &k, &RenderConfig::noiseless(), stamp(1));
        assert!(f.data.iter().all(|&c| c == 204));
    }

    #[test]
    fn sky_is_black_and_invalid() {
        let scene = Scene::flat(5.0, 0.1, 1);
        let k = CameraIntrinsics::default_rgbd();
        let mount = CameraMount { height: 0.5, pitch: 0.0 };
        let cam = mount.body_from_camera();
        let (rgb, depth) = render_rgbd(&scene, &cam, &k, &RenderConfig::noiseless(), stamp(1));
        assert_eq!(rgb.at(160, 0), [0, 0, 0]);
        assert_eq!(depth.at(160, 0), 0);
        assert_eq!(rgb.at(160, 239)[0], 204);
    }

    #[test]
    fn rock_hidden_below_terrain_is_ignored() {
        // A sphere whose upper cap is clipped by raising the terrain above
        // it leaves only terrain visible.
        let mut scene = Scene::flat(5.0, 0.1, 1);
        for h in &mut scene.heightmap.heights {
            *h = 0.3;
        }
        scene.rocks.push(super::super::Rock { x: 0.0, y: 0.0, z: 0.0, radius: 0.2 });
        let hit = cast_ray(&scene, Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0), &RenderConfig::noiseless()).unwrap();
        assert_eq!(hit.surface, Surface::Terrain);
        assert!((hit.point.z - 0.3).abs() < 1e-6);
    }
}
