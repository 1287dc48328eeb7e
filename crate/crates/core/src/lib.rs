//! Rover-side simulation and ground-side perception for a teleoperated
//! lunar rover: rigid-body geometry, a deterministic RGBD simulator, a
//! geometric rock detector, environment mapping and collision gating.
//!
//! Geometric kernels are generic over [`Real`] (`f32` or `f64`); the
//! pipeline runs in `f64` through the aliases defined here.

pub mod geometry;
pub mod kinematics;
pub mod mapping;
pub mod perception;
pub mod safety;
pub mod scalar;
pub mod simkit;

pub use scalar::{Real, Tolerances, TOLERANCES};

pub type Vec3 = geometry::Vec3<f64>;
pub type Quat = geometry::Quat<f64>;
pub type Pose = geometry::Pose<f64>;
pub type CameraIntrinsics = geometry::CameraIntrinsics<f64>;
pub type CameraMount = geometry::CameraMount<f64>;
pub type Plane = perception::Plane<f64>;
pub type VoxelGrid = mapping::VoxelGrid<f64>;
pub type SurfaceMesh = mapping::SurfaceMesh<f64>;

pub type Vec3f = geometry::Vec3<f32>;
pub type Quatf = geometry::Quat<f32>;
pub type Posef = geometry::Pose<f32>;
pub type CameraIntrinsicsf = geometry::CameraIntrinsics<f32>;
pub type Planef = perception::Plane<f32>;
pub type VoxelGridf = mapping::VoxelGrid<f32>;
pub type SurfaceMeshf = mapping::SurfaceMesh<f32>;
