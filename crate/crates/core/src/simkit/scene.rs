use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mix_seed, SimError};
use crate::Vec3;

/// Regular height grid. Node `(i, j)` sits at
/// `(origin_x + i * cell, origin_y + j * cell)` and is stored at `j * nx + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heightmap {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell: f64,
    pub nx: usize,
    pub ny: usize,
    pub heights: Vec<f64>,
}

impl Heightmap {
    pub fn flat(origin_x: f64, origin_y: f64, cell: f64, nx: usize, ny: usize) -> Self {
        Self { origin_x, origin_y, cell, nx, ny, heights: vec![0.0; nx * ny] }
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> f64 {
        self.heights[j * self.nx + i]
    }

    /// Bilinear interpolation; queries outside the grid clamp to the border.
    pub fn height(&self, x: f64, y: f64) -> f64 {
        let (i0, i1, tx) = Self::locate((x - self.origin_x) / self.cell, self.nx);
        let (j0, j1, ty) = Self::locate((y - self.origin_y) / self.cell, self.ny);
        let h00 = self.node(i0, j0);
        let h10 = self.node(i1, j0);
        let h01 = self.node(i0, j1);
        let h11 = self.node(i1, j1);
        let a = h00 + (h10 - h00) * tx;
        let b = h01 + (h11 - h01) * tx;
        a + (b - a) * ty
    }

    fn locate(f: f64, n: usize) -> (usize, usize, f64) {
        if n < 2 {
            return (0, 0, 0.0);
        }
        let f = f.clamp(0.0, (n - 1) as f64);
        let i0 = (f.floor() as usize).min(n - 2);
        (i0, i0 + 1, f - i0 as f64)
    }

    pub fn height_range(&self) -> (f64, f64) {
        self.heights
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| (lo.min(h), hi.max(h)))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.cell > 0.0) {
            return Err(SimError::InvalidParams("heightmap cell size must be positive"));
        }
        if self.nx == 0 || self.ny == 0 || self.heights.len() != self.nx * self.ny {
            return Err(SimError::InvalidParams("heightmap dimensions do not match data"));
        }
        if self.heights.iter().any(|h| !h.is_finite()) {
            return Err(SimError::InvalidParams("heightmap contains non-finite heights"));
        }
        Ok(())
    }
}

/// A hemispherical rock. `z` is the sphere center height, which sits on
/// the terrain surface below `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rock {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub radius: f64,
}

impl Rock {
    pub fn center(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub heightmap: Heightmap,
    pub rocks: Vec<Rock>,
    pub sun_direction: Vec3,
    pub seed: u64,
}

impl Scene {
    /// Flat terrain covering `[-half, half]²` with the sun at zenith.
    pub fn flat(half: f64, cell: f64, seed: u64) -> Self {
        let n = (2.0 * half / cell).round() as usize + 1;
        Self {
            heightmap: Heightmap::flat(-half, -half, cell, n, n),
            rocks: Vec::new(),
            sun_direction: Vec3::new(0.0, 0.0, 1.0),
            seed,
        }
    }

    pub fn terrain_height(&self, x: f64, y: f64) -> f64 {
        self.heightmap.height(x, y)
    }

    /// Adds a rock resting on the terrain at `(x, y)` and returns its index.
    pub fn place_rock(&mut self, x: f64, y: f64, radius: f64) -> usize {
        let z = self.terrain_height(x, y);
        self.rocks.push(Rock { x, y, z, radius });
        self.rocks.len() - 1
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.heightmap.validate()?;
        if self.rocks.iter().any(|r| !(r.radius > 0.0)) {
            return Err(SimError::InvalidParams("rock radii must be positive"));
        }
        if (self.sun_direction.norm() - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidParams("sun direction must be a unit vector"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneParams {
    /// Arena extent in x and y, centered on the rover start.
    pub arena: (f64, f64),
    pub rock_count: usize,
    pub radius_range: (f64, f64),
    /// Upper bound on |terrain height|.
    pub roughness: f64,
    pub cell: f64,
    pub min_start_distance: f64,
    pub min_rock_spacing: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            arena: (10.0, 10.0),
            rock_count: 12,
            radius_range: (0.1, 0.35),
            roughness: 0.05,
            cell: 0.1,
            min_start_distance: 1.0,
            min_rock_spacing: 0.5,
        }
    }
}

const BUMP_COUNT: usize = 6;
const MAX_PLACEMENT_SAMPLES: usize = 10_000;

/// Procedural arena.
///
/// Terrain height is a weighted sum of isotropic Gaussian bumps,
/// `h(x, y) = roughness * sum_k w_k * exp(-|p - c_k|² / (2 s_k²))`, with
/// `BUMP_COUNT` centers `c_k` uniform over the arena, widths `s_k` uniform
/// in `[1.5, 3.0]` m and weights `w_k` uniform in `[-1, 1]` rescaled so that
/// `sum |w_k| = 1`; hence `|h| <= roughness`. Rocks are placed by rejection
/// sampling at least `min_start_distance` from the origin and
/// `min_rock_spacing` apart center-to-center.
pub fn generate_scene(seed: u64, params: &SceneParams) -> Result<Scene, SimError> {
    let (ax, ay) = params.arena;
    if !(ax > 0.0 && ay > 0.0) || !(params.cell > 0.0) {
        return Err(SimError::InvalidParams("arena and cell size must be positive"));
    }
    let (rmin, rmax) = params.radius_range;
    if !(rmin > 0.0 && rmax >= rmin) {
        return Err(SimError::InvalidParams("radius range must be positive and ordered"));
    }
    if !(params.roughness >= 0.0) {
        return Err(SimError::InvalidParams("roughness must be non-negative"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x5CE7E));
    let (hx, hy) = (ax / 2.0, ay / 2.0);

    let mut bumps: Vec<(f64, f64, f64, f64)> = (0..BUMP_COUNT)
        .map(|_| {
            (
                rng.random_range(-hx..=hx),
                rng.random_range(-hy..=hy),
                rng.random_range(1.5..=3.0),
                rng.random_range(-1.0..=1.0),
            )
        })
        .collect();
    let wsum: f64 = bumps.iter().map(|b| b.3.abs()).sum();
    if wsum > 0.0 {
        for b in &mut bumps {
            b.3 /= wsum;
        }
    }

    let nx = (ax / params.cell).round() as usize + 1;
    let ny = (ay / params.cell).round() as usize + 1;
    let mut heightmap = Heightmap::flat(-hx, -hy, params.cell, nx, ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = -hx + i as f64 * params.cell;
            let y = -hy + j as f64 * params.cell;
            let h: f64 = bumps
                .iter()
                .map(|&(cx, cy, s, w)| {
                    let d2 = (x - cx).powi(2) + (y - cy).powi(2);
                    w * (-d2 / (2.0 * s * s)).exp()
                })
                .sum();
            heightmap.heights[j * nx + i] = params.roughness * h;
        }
    }

    let elevation = rng.random_range(35.0_f64..=65.0).to_radians();
    let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
    let sun_direction = Vec3::new(
        elevation.cos() * azimuth.cos(),
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
    )
    .normalized();

    let mut scene = Scene { heightmap, rocks: Vec::new(), sun_direction, seed };
    let mut samples = 0;
    while scene.rocks.len() < params.rock_count {
        if samples >= MAX_PLACEMENT_SAMPLES {
            return Err(SimError::InfeasiblePlacement {
                placed: scene.rocks.len(),
                requested: params.rock_count,
            });
        }
        samples += 1;
        let r = if rmax > rmin { rng.random_range(rmin..=rmax) } else { rmin };
        if r >= hx || r >= hy {
            continue;
        }
        let x = rng.random_range(-hx + r..=hx - r);
        let y = rng.random_range(-hy + r..=hy - r);
        if x.hypot(y) < params.min_start_distance {
            continue;
        }
        if scene
            .rocks
            .iter()
            .any(|o| (o.x - x).hypot(o.y - y) < params.min_rock_spacing)
        {
            continue;
        }
        scene.place_rock(x, y, r);
    }
    Ok(scene)
}
