//! Environment reconstruction: voxel accumulation, the operator-facing
//! heightmap mesh, and persistent rock landmarks fused from detections.

mod mesh;
mod tracker;
mod voxel;

pub use mesh::{build_heightmap_mesh, Roi, SurfaceMesh};
pub use tracker::{associate_landmarks, LandmarkTracker, RockLandmark, TrackerParams};
pub use voxel::{voxel_centroids, voxel_insert, VoxelGrid, VoxelKey};
