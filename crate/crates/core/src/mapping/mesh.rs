use serde::{Deserialize, Serialize};

use super::VoxelGrid;
use crate::geometry::Vec3;
use crate::scalar::Real;

/// Axis-aligned region of interest in the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Roi {
    pub fn centered(half: f64) -> Self {
        Self { x_min: -half, x_max: half, y_min: -half, y_max: half }
    }

    pub fn is_empty(&self) -> bool {
        !(self.x_max > self.x_min && self.y_max > self.y_min)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfaceMesh<T> {
    pub vertices: Vec<Vec3<T>>,
    pub triangles: Vec<[u32; 3]>,
    pub generation: u32,
}

/// Triangulated heightmap over `roi`.
///
/// Lattice vertices sit every `cell` meters. A vertex takes the maximum z
/// of the voxel centroids binned to it (nearest lattice node) and is absent
/// when its bin is empty. Each lattice cell with all four corners present
/// emits two triangles wound counter-clockwise seen from +z.
pub fn build_heightmap_mesh<T: Real>(g: &VoxelGrid<T>, roi: &Roi, cell: f64, generation: u32) -> SurfaceMesh<T> {
    if g.is_empty() || roi.is_empty() || !(cell > 0.0) {
        return SurfaceMesh { generation, ..Default::default() };
    }
    let nx = (((roi.x_max - roi.x_min) / cell).round() as usize).max(1);
    let ny = (((roi.y_max - roi.y_min) / cell).round() as usize).max(1);
    let (vx, vy) = (nx + 1, ny + 1);
    let mut heights: Vec<Option<T>> = vec![None; vx * vy];
    for c in g.centroids() {
        let fi = ((c.x.to_f64_lossy() - roi.x_min) / cell + 0.5).floor();
        let fj = ((c.y.to_f64_lossy() - roi.y_min) / cell + 0.5).floor();
        if fi < 0.0 || fj < 0.0 || fi > nx as f64 || fj > ny as f64 {
            continue;
        }
        let slot = &mut heights[fj as usize * vx + fi as usize];
        *slot = Some(slot.map_or(c.z, |h| h.max(c.z)));
    }

    let mut index = vec![u32::MAX; vx * vy];
    let mut vertices = Vec::new();
    for j in 0..vy {
        for i in 0..vx {
            if let Some(h) = heights[j * vx + i] {
                index[j * vx + i] = vertices.len() as u32;
                vertices.push(Vec3::new(
                    T::lit(roi.x_min + i as f64 * cell),
                    T::lit(roi.y_min + j as f64 * cell),
                    h,
                ));
            }
        }
    }
    let mut triangles = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let a = index[j * vx + i];
            let b = index[j * vx + i + 1];
            let c = index[(j + 1) * vx + i + 1];
            let d = index[(j + 1) * vx + i];
            if [a, b, c, d].contains(&u32::MAX) {
                continue;
            }
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    SurfaceMesh { vertices, triangles, generation }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::voxel_insert;

    type V = Vec3<f64>;

    fn normal(m: &SurfaceMesh<f64>, t: [u32; 3]) -> V {
        let [a, b, c] = t.map(|i| m.vertices[i as usize]);
        (b - a).cross(c - a).normalized()
    }

    #[test]
    fn empty_grid_empty_mesh() {
        let m = build_heightmap_mesh(&VoxelGrid::<f64>::new(0.05), &Roi::centered(1.0), 0.1, 3);
        assert!(m.vertices.is_empty() && m.triangles.is_empty());
        assert_eq!(m.generation, 3);
    }

    #[test]
    fn two_by_two_cells() {
        let mut g = VoxelGrid::new(0.05);
        let roi = Roi { x_min: 0.0, x_max: 0.2, y_min: 0.0, y_max: 0.2 };
        for j in 0..3 {
            for i in 0..3 {
                g.insert(V::new(i as f64 * 0.1 + 0.01, j as f64 * 0.1 - 0.01, 0.0));
            }
        }
        let m = build_heightmap_mesh(&g, &roi, 0.1, 1);
        assert_eq!(m.vertices.len(), 9);
        assert_eq!(m.triangles.len(), 8);
        for t in &m.triangles {
            assert!(t.iter().all(|&i| (i as usize) < m.vertices.len()));
            assert!((normal(&m, *t) - V::new(0.0, 0.0, 1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn vertex_takes_max_height() {
        let mut g = VoxelGrid::new(0.01);
        voxel_insert(&mut g, [V::new(0.0, 0.0, 0.02), V::new(0.02, 0.01, 0.3), V::new(0.5, 0.5, 9.0)]);
        let roi = Roi { x_min: 0.0, x_max: 0.1, y_min: 0.0, y_max: 0.1 };
        let m = build_heightmap_mesh(&g, &roi, 0.1, 0);
        assert_eq!(m.vertices.len(), 1);
        assert!((m.vertices[0].z - 0.3).abs() < 1e-12);
        assert!(m.triangles.is_empty());
    }

    #[test]
    fn sloped_surface_winding_faces_up() {
        let mut g = VoxelGrid::new(0.02);
        for j in 0..5 {
            for i in 0..5 {
                g.insert(V::new(i as f64 * 0.1, j as f64 * 0.1, 0.3 * i as f64 * 0.1 + 0.1 * j as f64 * 0.1));
            }
        }
        let m = build_heightmap_mesh(&g, &Roi { x_min: 0.0, x_max: 0.4, y_min: 0.0, y_max: 0.4 }, 0.1, 0);
        assert_eq!(m.triangles.len(), 32);
        assert!(m.triangles.iter().all(|t| normal(&m, *t).z > 0.0));
    }
}
