//! Rigid transforms and the pinhole camera model.
//!
//! Frames: world is z-up in meters. The rover body frame is x forward, y left,
//! z up. The camera optical frame is z forward, x right, y down. Quaternions
//! are stored in (w, x, y, z) order and kept at unit norm by every
//! constructor and by composition.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Real, TOLERANCES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("back-projection needs positive depth, got {0}")]
    NonPositiveDepth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction; the zero vector is returned as is.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self * (T::one() / n)
        } else {
            self
        }
    }

    /// Distance in the xy-plane, ignoring z.
    #[inline]
    pub fn horizontal_distance(self, o: Self) -> T {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T: Real> From<[T; 3]> for Vec3<T> {
    fn from(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Default for Quat<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Quat<T> {
    pub fn identity() -> Self {
        Self { w: T::one(), x: T::zero(), y: T::zero(), z: T::zero() }
    }

    /// Builds a quaternion from raw components and normalizes it. A zero
    /// quaternion falls back to identity.
    pub fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }.normalized()
    }

    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let axis = axis.normalized();
        let half = angle * T::lit(0.5);
        let s = half.sin();
        Self::new(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// Rotation about world z.
    pub fn from_yaw(yaw: T) -> Self {
        Self::from_axis_angle(Vec3::new(T::zero(), T::zero(), T::one()), yaw)
    }

    /// Converts a proper rotation matrix (row-major) into a quaternion.
    pub fn from_rotation_matrix(m: [[T; 3]; 3]) -> Self {
        let one = T::one();
        let quarter = T::lit(0.25);
        let trace = m[0][0] + m[1][1] + m[2][2];
        if trace > T::zero() {
            let s = (trace + one).sqrt() * T::lit(2.0);
            Self::new(
                quarter * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (one + m[0][0] - m[1][1] - m[2][2]).sqrt() * T::lit(2.0);
            Self::new(
                (m[2][1] - m[1][2]) / s,
                quarter * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (one + m[1][1] - m[0][0] - m[2][2]).sqrt() * T::lit(2.0);
            Self::new(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                quarter * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (one + m[2][2] - m[0][0] - m[1][1]).sqrt() * T::lit(2.0);
            Self::new(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                quarter * s,
            )
        }
    }

    pub fn norm(self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            let inv = T::one() / n;
            Self { w: self.w * inv, x: self.x * inv, y: self.y * inv, z: self.z * inv }
        } else {
            Self::identity()
        }
    }

    pub fn is_unit(self) -> bool {
        (self.norm() - T::one()).abs().to_f64_lossy() <= TOLERANCES.unit_norm
    }

    pub fn conjugate(self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self * o`, re-normalized.
    pub fn mul(self, o: Self) -> Self {
        Self {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
        .normalized()
    }

    /// Computes `q v q*`.
    pub fn rotate(self, v: Vec3<T>) -> Vec3<T> {
        let u = Vec3::new(self.x, self.y, self.z);
        let two = T::lit(2.0);
        let t = u.cross(v) * two;
        v + t * self.w + u.cross(t)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(self) -> T {
        let v = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        T::lit(2.0) * v.atan2(self.w.abs())
    }

    /// Heading of the rotated body x axis, measured in the world xy-plane.
    pub fn yaw(self) -> T {
        let two = T::lit(2.0);
        let siny = two * (self.w * self.z + self.x * self.y);
        let cosy = T::one() - two * (self.y * self.y + self.z * self.z);
        siny.atan2(cosy)
    }
}

/// Rigid transform in SE(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub rotation: Quat<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Default for Pose<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Pose<T> {
    pub fn identity() -> Self {
        Self { rotation: Quat::identity(), translation: Vec3::zero() }
    }

    pub fn new(rotation: Quat<T>, translation: Vec3<T>) -> Self {
        Self { rotation: rotation.normalized(), translation }
    }

    pub fn from_translation(x: T, y: T, z: T) -> Self {
        Self::new(Quat::identity(), Vec3::new(x, y, z))
    }

    /// Planar pose: heading `yaw` about world z at `(x, y, z)`.
    pub fn from_xy_yaw(x: T, y: T, z: T, yaw: T) -> Self {
        Self::new(Quat::from_yaw(yaw), Vec3::new(x, y, z))
    }

    /// `self ∘ other`: maps `p` to `self(other(p))`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation.mul(other.rotation),
            translation: self.rotation.rotate(other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.conjugate();
        Self { rotation: r, translation: -r.rotate(self.translation) }
    }

    #[inline]
    pub fn transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(p) + self.translation
    }

    #[inline]
    pub fn transform_vector(&self, v: Vec3<T>) -> Vec3<T> {
        self.rotation.rotate(v)
    }
}

/// Free function forms of the pose operations.
pub fn quat_rotate<T: Real>(q: Quat<T>, v: Vec3<T>) -> Vec3<T> {
    q.rotate(v)
}

pub fn pose_compose<T: Real>(a: &Pose<T>, b: &Pose<T>) -> Pose<T> {
    a.compose(b)
}

pub fn pose_inverse<T: Real>(a: &Pose<T>) -> Pose<T> {
    a.inverse()
}

pub fn transform_point<T: Real>(a: &Pose<T>, p: Vec3<T>) -> Vec3<T> {
    a.transform_point(p)
}

/// Pinhole intrinsics. `depth_scale` converts raw depth units to meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: u32,
    pub height: u32,
    pub depth_scale: T,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(
        fx: T,
        fy: T,
        cx: T,
        cy: T,
        width: u32,
        height: u32,
        depth_scale: T,
    ) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy, width, height, depth_scale };
        k.validate()?;
        Ok(k)
    }

    /// 320×240 with a wide field of view, millimeter depth units.
    pub fn default_rgbd() -> Self {
        Self {
            fx: T::lit(277.0),
            fy: T::lit(277.0),
            cx: T::lit(160.0),
            cy: T::lit(120.0),
            width: 320,
            height: 240,
            depth_scale: T::lit(0.001),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let zero = T::zero();
        if !(self.fx > zero && self.fy > zero) {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics("image size must be positive"));
        }
        let w = T::from_u32(self.width).unwrap_or_else(T::max_value);
        let h = T::from_u32(self.height).unwrap_or_else(T::max_value);
        if !(self.cx >= zero && self.cx < w && self.cy >= zero && self.cy < h) {
            return Err(GeometryError::InvalidIntrinsics("principal point outside image"));
        }
        if !(self.depth_scale > zero) {
            return Err(GeometryError::InvalidIntrinsics("depth scale must be positive"));
        }
        Ok(())
    }

    /// Projects a camera-frame point to pixel coordinates. Returns `None`
    /// for points at or behind the image plane; the result is not clipped
    /// to the image bounds.
    pub fn project(&self, p: Vec3<T>) -> Option<(T, T)> {
        if p.z <= T::lit(TOLERANCES.min_projection_depth) {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn back_project(&self, u: T, v: T, z: T) -> Result<Vec3<T>, GeometryError> {
        if !(z > T::zero()) {
            return Err(GeometryError::NonPositiveDepth(z.to_f64_lossy()));
        }
        Ok(Vec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z))
    }

    /// Camera-frame ray direction through `(u, v)` with unit z component.
    pub fn ray(&self, u: T, v: T) -> Vec3<T> {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, T::one())
    }
}

pub fn project<T: Real>(k: &CameraIntrinsics<T>, p_cam: Vec3<T>) -> Option<(T, T)> {
    k.project(p_cam)
}

pub fn back_project<T: Real>(
    k: &CameraIntrinsics<T>,
    u: T,
    v: T,
    z: T,
) -> Result<Vec3<T>, GeometryError> {
    k.back_project(u, v, z)
}

/// Fixed body→camera extrinsic: camera `height` meters above the body
/// origin, looking along body x and pitched down by `pitch` radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraMount<T> {
    pub height: T,
    pub pitch: T,
}

impl<T: Real> Default for CameraMount<T> {
    fn default() -> Self {
        Self { height: T::lit(0.5), pitch: T::lit(20.0_f64.to_radians()) }
    }
}

impl<T: Real> CameraMount<T> {
    /// Pose of the camera optical frame expressed in the body frame.
    pub fn body_from_camera(&self) -> Pose<T> {
        let (o, z) = (T::one(), T::zero());
        // Columns are the optical axes expressed in body coordinates:
        // x_opt = -y_body, y_opt = -z_body, z_opt = x_body.
        let level = Quat::from_rotation_matrix([[z, z, o], [-o, z, z], [z, -o, z]]);
        let pitch = Quat::from_axis_angle(Vec3::new(z, o, z), self.pitch);
        Pose::new(pitch.mul(level), Vec3::new(z, z, self.height))
    }

    pub fn camera_in_world(&self, body_in_world: &Pose<T>) -> Pose<T> {
        body_in_world.compose(&self.body_from_camera())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    type V = Vec3<f64>;

    fn close(a: V, b: V, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn random_quat(rng: &mut ChaCha8Rng) -> Quat<f64> {
        loop {
            let q = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n2: f64 = q.iter().map(|c| c * c).sum();
            if n2 > 1e-3 && n2 <= 1.0 {
                return Quat::new(q[0], q[1], q[2], q[3]);
            }
        }
    }

    fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> V {
        V::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
    }

    fn k() -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(100.0, 100.0, 320.0, 240.0, 640, 480, 0.001).unwrap()
    }

    #[test]
    fn identity_rotation_is_noop() {
        let v = V::new(3.0, 4.0, 5.0);
        assert_eq!(Quat::identity().rotate(v), v);
    }

    #[test]
    fn quarter_turn_about_z() {
        let q = Quat::new(FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2);
        assert!(close(q.rotate(V::new(1.0, 0.0, 0.0)), V::new(0.0, 1.0, 0.0), 1e-12));
    }

    #[test]
    fn rotation_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let q = random_quat(&mut rng);
            let v = random_vec(&mut rng, 10.0);
            assert!((q.rotate(v).norm() - v.norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn compose_examples() {
        let p = Pose::new(Quat::from_yaw(0.3), V::new(1.0, -2.0, 0.5));
        let c = Pose::identity().compose(&p);
        assert!(close(c.translation, p.translation, 1e-15));
        assert!(c.rotation.mul(p.rotation.conjugate()).angle() < 1e-12);

        let ab = Pose::from_translation(1.0, 0.0, 0.0).compose(&Pose::from_translation(0.0, 2.0, 0.0));
        assert_eq!(ab.translation, V::new(1.0, 2.0, 0.0));
    }

    #[test]
    fn inverse_examples() {
        let i = Pose::<f64>::identity().inverse();
        assert_eq!(i.translation, V::zero());
        assert!(i.rotation.angle() < 1e-15);
        let t = Pose::from_translation(1.0, 2.0, 3.0).inverse();
        assert_eq!(t.translation, V::new(-1.0, -2.0, -3.0));
    }

    #[test]
    fn transform_point_examples() {
        assert_eq!(Pose::identity().transform_point(V::new(1.0, 1.0, 1.0)), V::new(1.0, 1.0, 1.0));
        let p = Pose::new(Quat::from_yaw(FRAC_PI_2), V::new(1.0, 0.0, 0.0));
        assert!(close(p.transform_point(V::new(1.0, 0.0, 0.0)), V::new(1.0, 1.0, 0.0), 1e-12));
    }

    #[test]
    fn compose_is_associative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let [a, b, c] = [0; 3].map(|_| Pose::new(random_quat(&mut rng), random_vec(&mut rng, 5.0)));
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            assert!(close(l.translation, r.translation, 1e-9));
            assert!(l.rotation.mul(r.rotation.conjugate()).angle() < 1e-9);
        }
    }

    #[test]
    fn projection_examples() {
        let k = k();
        assert_eq!(k.project(V::new(0.0, 0.0, 2.0)), Some((320.0, 240.0)));
        assert_eq!(k.project(V::new(1.0, 0.0, 2.0)), Some((370.0, 240.0)));
        assert_eq!(k.project(V::new(0.0, 0.0, -1.0)), None);
        assert_eq!(k.back_project(320.0, 240.0, 2.0).unwrap(), V::new(0.0, 0.0, 2.0));
        assert_eq!(k.back_project(370.0, 240.0, 2.0).unwrap(), V::new(1.0, 0.0, 2.0));
    }

    #[test]
    fn back_project_rejects_non_positive_depth() {
        assert!(matches!(k().back_project(1.0, 1.0, 0.0), Err(GeometryError::NonPositiveDepth(_))));
        assert!(k().back_project(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4, 1.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4, 1.0).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, 1.0, 4, 4, 0.0).is_err());
        CameraIntrinsics::<f64>::default_rgbd().validate().unwrap();
        CameraIntrinsics::<f32>::default_rgbd().validate().unwrap();
    }

    #[test]
    fn matrix_conversion_matches_axis_angle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q = random_quat(&mut rng);
            let ex = q.rotate(V::new(1.0, 0.0, 0.0));
            let ey = q.rotate(V::new(0.0, 1.0, 0.0));
            let ez = q.rotate(V::new(0.0, 0.0, 1.0));
            let m = [[ex.x, ey.x, ez.x], [ex.y, ey.y, ez.y], [ex.z, ey.z, ez.z]];
            let r = Quat::from_rotation_matrix(m);
            assert!(r.mul(q.conjugate()).angle() < 1e-9);
        }
    }

    #[test]
    fn yaw_round_trip() {
        for yaw in [-3.0, -1.0, 0.0, 0.5, 2.9] {
            assert!((Quat::<f64>::from_yaw(yaw).yaw() - yaw).abs() < 1e-12);
        }
    }

    #[test]
    fn default_mount_looks_forward_and_down() {
        let cam = CameraMount::<f64>::default().body_from_camera();
        assert!(close(cam.translation, V::new(0.0, 0.0, 0.5), 1e-12));
        let forward = cam.transform_vector(V::new(0.0, 0.0, 1.0));
        let pitch = 20.0_f64.to_radians();
        assert!(close(forward, V::new(pitch.cos(), 0.0, -pitch.sin()), 1e-12));
        // Image right maps to body -y; image down maps below the horizon.
        assert!(close(cam.transform_vector(V::new(1.0, 0.0, 0.0)), V::new(0.0, -1.0, 0.0), 1e-12));
        assert!(cam.transform_vector(V::new(0.0, 1.0, 0.0)).z < 0.0);
    }

    #[test]
    fn f32_rotation_preserves_norm_loosely() {
        let q = Quat::<f32>::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7);
        let v = Vec3::new(0.3f32, -2.0, 1.5);
        assert!((q.rotate(v).norm() - v.norm()).abs() < 1e-5);
    }
}
