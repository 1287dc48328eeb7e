//! Scalar abstraction shared by the geometric kernels.

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        // Every finite f64 has a (possibly rounded) f32 representation.
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Numeric tolerances used across the crate, gathered in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Allowed deviation of a unit quaternion's norm from 1.
    pub unit_norm: f64,
    /// Points with camera-frame depth at or below this are behind the camera.
    pub min_projection_depth: f64,
    /// Angular rates below this use the straight-line motion branch.
    pub straight_line_omega: f64,
    /// Cross products smaller than this mark a degenerate (collinear) triple.
    pub collinear_cross: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    unit_norm: 1e-9,
    min_projection_depth: 1e-6,
    straight_line_omega: 1e-6,
    collinear_cross: 1e-9,
};
