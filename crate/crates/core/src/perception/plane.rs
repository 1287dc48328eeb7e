use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DetectorParams, PerceptionError};
use crate::geometry::Vec3;
use crate::scalar::{Real, TOLERANCES};

/// Plane `normal · p + offset = 0` with an upward-facing unit normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane<T> {
    pub normal: Vec3<T>,
    pub offset: T,
    pub inlier_count: usize,
}

impl<T: Real> Plane<T> {
    /// Builds an upward-oriented plane through `point` with the given normal.
    pub fn through(normal: Vec3<T>, point: Vec3<T>) -> Self {
        let mut n = normal.normalized();
        if n.z < T::zero() {
            n = -n;
        }
        Self { normal: n, offset: -n.dot(point), inlier_count: 0 }
    }

    #[inline]
    pub fn signed_distance(&self, p: Vec3<T>) -> T {
        self.normal.dot(p) + self.offset
    }

    /// Point on the plane directly above or below `(x, y)`.
    pub fn point_at(&self, x: T, y: T, height: T) -> Vec3<T> {
        let n = self.normal;
        let z = (height - self.offset - n.x * x - n.y * y) / n.z;
        Vec3::new(x, y, z)
    }

    pub fn inliers(&self, points: &[Vec3<T>], tau: T) -> Vec<usize> {
        points
            .iter()
            .enumerate()
            .filter(|(_, p)| self.signed_distance(**p).abs() < tau)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn residual_rms(&self, points: &[Vec3<T>], idx: &[usize]) -> T {
        if idx.is_empty() {
            return T::zero();
        }
        let sum = idx.iter().fold(T::zero(), |acc, &i| {
            let r = self.signed_distance(points[i]);
            acc + r * r
        });
        (sum / T::from_usize(idx.len()).unwrap()).sqrt()
    }
}

/// Full record of a RANSAC fit: the raw best candidate, its inliers and the
/// least-squares refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit<T> {
    pub plane: Plane<T>,
    pub candidate: Plane<T>,
    pub candidate_inliers: Vec<usize>,
    pub inliers: Vec<usize>,
}

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and the matching eigenvectors as columns.
pub fn symmetric_eigen3<T: Real>(m: [[T; 3]; 3]) -> ([T; 3], [[T; 3]; 3]) {
    let mut a = m;
    let (zero, one) = (T::zero(), T::one());
    let mut v = [[one, zero, zero], [zero, one, zero], [zero, zero, one]];
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        let diag = a[0][0] * a[0][0] + a[1][1] * a[1][1] + a[2][2] * a[2][2];
        if off <= T::epsilon() * T::epsilon() * diag || off == zero {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == zero {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + one).sqrt());
            let c = one / (t * t + one).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vkp = row[p];
                let vkq = row[q];
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Total least-squares plane through `idx`: normal is the eigenvector of
/// the smallest covariance eigenvalue.
pub fn refine_plane<T: Real>(points: &[Vec3<T>], idx: &[usize]) -> Option<Plane<T>> {
    if idx.len() < 3 {
        return None;
    }
    let n = T::from_usize(idx.len()).unwrap();
    let centroid = idx.iter().fold(Vec3::zero(), |acc, &i| acc + points[i]) * (T::one() / n);
    let mut c = [[T::zero(); 3]; 3];
    for &i in idx {
        let d = (points[i] - centroid).to_array();
        for r in 0..3 {
            for k in 0..3 {
                c[r][k] = c[r][k] + d[r] * d[k];
            }
        }
    }
    let (vals, vecs) = symmetric_eigen3(c);
    let mut min = 0;
    for j in 1..3 {
        if vals[j] < vals[min] {
            min = j;
        }
    }
    let normal = Vec3::new(vecs[0][min], vecs[1][min], vecs[2][min]);
    normal.is_finite().then(|| Plane::through(normal, centroid))
}

/// RANSAC ground-plane fit followed by least-squares refinement.
pub fn fit_plane_detailed<T: Real>(
    points: &[Vec3<T>],
    params: &DetectorParams,
    seed: u64,
) -> Result<PlaneFit<T>, PerceptionError> {
    let n = points.len();
    if n < 3 {
        return Err(PerceptionError::TooFewPoints(n));
    }
    let tau = T::lit(params.inlier_tau);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Plane<T>, usize)> = None;
    for _ in 0..params.ransac_iters {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..n - 2);
        for lo in [i.min(j), i.max(j)] {
            if k >= lo {
                k += 1;
            }
        }
        let (a, b, c) = (points[i], points[j], points[k]);
        let cross = (b - a).cross(c - a);
        if cross.norm().to_f64_lossy() < TOLERANCES.collinear_cross {
            continue;
        }
        let cand = Plane::through(cross, a);
        let count = points.iter().filter(|p| cand.signed_distance(**p).abs() < tau).count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((Plane { inlier_count: count, ..cand }, count));
        }
    }
    let (candidate, count) = best.ok_or(PerceptionError::NoGround { inlier_fraction: 0.0 })?;
    let fraction = count as f64 / n as f64;
    if fraction < params.min_inlier_frac {
        return Err(PerceptionError::NoGround { inlier_fraction: fraction });
    }
    let candidate_inliers = candidate.inliers(points, tau);
    let refined = refine_plane(points, &candidate_inliers).unwrap_or(candidate);
    let inliers = refined.inliers(points, tau);
    Ok(PlaneFit {
        plane: Plane { inlier_count: inliers.len(), ..refined },
        candidate,
        candidate_inliers,
        inliers,
    })
}

pub fn fit_ground_plane_ransac<T: Real>(
    points: &[Vec3<T>],
    params: &DetectorParams,
    seed: u64,
) -> Result<Plane<T>, PerceptionError> {
    fit_plane_detailed(points, params, seed).map(|f| f.plane)
}
