use std::collections::BTreeMap;

use crate::geometry::Vec3;
use crate::scalar::Real;

pub type VoxelKey = (i64, i64, i64);

/// Sparse voxel grid accumulating a point sum and count per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<T> {
    pub voxel_size: T,
    cells: BTreeMap<VoxelKey, (Vec3<T>, u64)>,
}

impl<T: Real> VoxelGrid<T> {
    pub fn new(voxel_size: T) -> Self {
        assert!(voxel_size > T::zero(), "voxel size must be positive");
        Self { voxel_size, cells: BTreeMap::new() }
    }

    pub fn key(&self, p: Vec3<T>) -> VoxelKey {
        let f = |c: T| (c / self.voxel_size).floor().to_i64().unwrap_or(0);
        (f(p.x), f(p.y), f(p.z))
    }

    pub fn insert(&mut self, p: Vec3<T>) {
        let cell = self.cells.entry(self.key(p)).or_insert((Vec3::zero(), 0));
        cell.0 += p;
        cell.1 += 1;
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, key: VoxelKey) -> Option<(Vec3<T>, u64)> {
        self.cells.get(&key).copied()
    }

    /// Cell centroids in lexicographic key order.
    pub fn centroids(&self) -> Vec<Vec3<T>> {
        self.cells
            .values()
            .map(|(sum, n)| *sum * (T::one() / T::from_u64(*n).unwrap()))
            .collect()
    }
}

pub fn voxel_insert<T: Real>(g: &mut VoxelGrid<T>, points: impl IntoIterator<Item = Vec3<T>>) {
    for p in points {
        g.insert(p);
    }
}

pub fn voxel_centroids<T: Real>(g: &VoxelGrid<T>) -> Vec<Vec3<T>> {
    g.centroids()
}
