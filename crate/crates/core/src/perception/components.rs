use std::collections::VecDeque;

use super::{PixelPoint, Plane};

/// Boolean mask over the stride grid of an image. Cell `(c, r)` stands for
/// pixel `(c * stride, r * stride)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrideMask {
    pub cols: u32,
    pub rows: u32,
    pub stride: u32,
    bits: Vec<bool>,
}

impl StrideMask {
    pub fn new(width: u32, height: u32, stride: u32) -> Self {
        let stride = stride.max(1);
        let cols = width.div_ceil(stride);
        let rows = height.div_ceil(stride);
        Self { cols, rows, stride, bits: vec![false; (cols * rows) as usize] }
    }

    #[inline]
    fn index(&self, c: u32, r: u32) -> usize {
        (r * self.cols + c) as usize
    }

    pub fn get_cell(&self, c: u32, r: u32) -> bool {
        self.bits[self.index(c, r)]
    }

    pub fn set_cell(&mut self, c: u32, r: u32, value: bool) {
        let i = self.index(c, r);
        self.bits[i] = value;
    }

    /// Marks a full-resolution pixel; off-grid pixels are ignored.
    pub fn mark_pixel(&mut self, u: u32, v: u32) {
        if u.is_multiple_of(self.stride) && v.is_multiple_of(self.stride) {
            let (c, r) = (u / self.stride, v / self.stride);
            if c < self.cols && r < self.rows {
                self.set_cell(c, r, true);
            }
        }
    }

    pub fn is_pixel_marked(&self, u: u32, v: u32) -> bool {
        u.is_multiple_of(self.stride)
            && v.is_multiple_of(self.stride)
            && u / self.stride < self.cols
            && v / self.stride < self.rows
            && self.get_cell(u / self.stride, v / self.stride)
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }
}

/// Pixels of one connected component, full-resolution coordinates in
/// raster order.
pub type Component = Vec<(u32, u32)>;

/// Marks every point whose signed height above `plane` exceeds `h_min`.
pub fn above_plane_mask(
    points: &[PixelPoint],
    plane: &Plane<f64>,
    h_min: f64,
    width: u32,
    height: u32,
    stride: u32,
) -> StrideMask {
    let mut mask = StrideMask::new(width, height, stride);
    for p in points {
        if plane.signed_distance(p.world) > h_min {
            mask.mark_pixel(p.u, p.v);
        }
    }
    mask
}

/// Maximal connected components of the marked cells, adjacency measured
/// between stride-grid neighbors. Components are ordered by their first
/// pixel in raster order (smallest `v`, then smallest `u` on that row).
pub fn connected_components(mask: &StrideMask, connectivity: u8) -> Vec<Component> {
    const N4: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    const N8: [(i32, i32); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    let neighbors: &[(i32, i32)] = if connectivity == 4 { &N4 } else { &N8 };

    let mut seen = vec![false; (mask.cols * mask.rows) as usize];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for r in 0..mask.rows {
        for c in 0..mask.cols {
            let i = mask.index(c, r);
            if !mask.bits[i] || seen[i] {
                continue;
            }
            seen[i] = true;
            queue.push_back((c, r));
            let mut cells = Vec::new();
            while let Some((cc, cr)) = queue.pop_front() {
                cells.push((cc, cr));
                for &(dc, dr) in neighbors {
                    let (nc, nr) = (cc as i32 + dc, cr as i32 + dr);
                    if nc < 0 || nr < 0 || nc >= mask.cols as i32 || nr >= mask.rows as i32 {
                        continue;
                    }
                    let j = mask.index(nc as u32, nr as u32);
                    if mask.bits[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back((nc as u32, nr as u32));
                    }
                }
            }
            cells.sort_unstable_by_key(|&(c, r)| (r, c));
            out.push(cells.into_iter().map(|(c, r)| (c * mask.stride, r * mask.stride)).collect());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ground() -> Plane<f64> {
        Plane::through(Vec3::new(0.0, 0.0, 1.0), Vec3::zero())
    }

    fn pp(u: u32, v: u32, z: f64) -> PixelPoint {
        PixelPoint { u, v, world: Vec3::new(u as f64, v as f64, z) }
    }

    #[test]
    fn points_on_plane_leave_mask_empty() {
        let pts: Vec<_> = (0..10).map(|i| pp(2 * i, 0, 0.0)).collect();
        assert_eq!(above_plane_mask(&pts, &ground(), 0.05, 20, 2, 2).count(), 0);
    }

    #[test]
    fn raised_point_is_marked_and_tie_is_not() {
        let pts = [pp(0, 0, 0.10), pp(2, 0, 0.05), pp(4, 0, 0.0)];
        let m = above_plane_mask(&pts, &ground(), 0.05, 6, 2, 2);
        assert!(m.is_pixel_marked(0, 0));
        assert!(!m.is_pixel_marked(2, 0));
        assert_eq!(m.count(), 1);
    }

    #[test]
    fn empty_mask_no_components() {
        assert!(connected_components(&StrideMask::new(8, 8, 2), 8).is_empty());
    }

    #[test]
    fn diagonal_pair() {
        let mut m = StrideMask::new(8, 8, 2);
        m.set_cell(1, 1, true);
        m.set_cell(2, 2, true);
        assert_eq!(connected_components(&m, 8), vec![vec![(2, 2), (4, 4)]]);
        assert_eq!(connected_components(&m, 4).len(), 2);
    }

    #[test]
    fn ordering_by_first_raster_pixel() {
        let mut m = StrideMask::new(10, 10, 1);
        // Component A starts lower but reaches further left.
        m.set_cell(0, 5, true);
        m.set_cell(0, 6, true);
        // Component B is on an earlier row.
        m.set_cell(7, 2, true);
        let cs = connected_components(&m, 4);
        assert_eq!(cs, vec![vec![(7, 2)], vec![(0, 5), (0, 6)]]);
    }

    /// Recursive depth-first flood fill used as an independent oracle.
    fn oracle_count(bits: &[Vec<bool>], eight: bool) -> usize {
        fn fill(bits: &[Vec<bool>], seen: &mut [Vec<bool>], r: i32, c: i32, eight: bool) {
            let n = bits.len() as i32;
            if r < 0 || c < 0 || r >= n || c >= n {
                return;
            }
            let (ru, cu) = (r as usize, c as usize);
            if !bits[ru][cu] || seen[ru][cu] {
                return;
            }
            seen[ru][cu] = true;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                        continue;
                    }
                    fill(bits, seen, r + dr, c + dc, eight);
                }
            }
        }
        let n = bits.len();
        let mut seen = vec![vec![false; n]; n];
        let mut count = 0;
        for r in 0..n {
            for c in 0..n {
                if bits[r][c] && !seen[r][c] {
                    count += 1;
                    fill(bits, &mut seen, r as i32, c as i32, eight);
                }
            }
        }
        count
    }

    #[test]
    fn random_masks_match_flood_fill() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let density = 0.2 + 0.5 * (trial % 5) as f64 / 5.0;
            let bits: Vec<Vec<bool>> = (0..16).map(|_| (0..16).map(|_| rng.random_bool(density)).collect()).collect();
            let mut m = StrideMask::new(16, 16, 1);
            for r in 0..16 {
                for c in 0..16 {
                    m.set_cell(c, r, bits[r as usize][c as usize]);
                }
            }
            for conn in [4u8, 8] {
                let cs = connected_components(&m, conn);
                assert_eq!(cs.len(), oracle_count(&bits, conn == 8));
                assert_eq!(cs.iter().map(Vec::len).sum::<usize>(), m.count());
            }
        }
    }
}
