//! Constant-twist planar motion shared by the simulator and path prediction.

use crate::scalar::{Real, TOLERANCES};

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let pi = T::PI();
    let two_pi = pi + pi;
    let mut a = theta % two_pi;
    if a > pi {
        a = a - two_pi;
    } else if a <= -pi {
        a = a + two_pi;
    }
    a
}

/// Integrates `(v, omega)` held constant for `dt` seconds from `(x, y, theta)`.
///
/// Uses exact arc integration; below the straight-line threshold on `omega`
/// the motion is treated as a line segment.
pub fn arc_step<T: Real>(x: T, y: T, theta: T, v: T, omega: T, dt: T) -> (T, T, T) {
    if omega.abs() < T::lit(TOLERANCES.straight_line_omega) {
        (x + v * theta.cos() * dt, y + v * theta.sin() * dt, wrap_angle(theta + omega * dt))
    } else {
        let r = v / omega;
        let th1 = theta + omega * dt;
        (x + r * (th1.sin() - theta.sin()), y - r * (th1.cos() - theta.cos()), wrap_angle(th1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5 + 4.0 * PI) - 0.5).abs() < 1e-12);
        assert!((wrap_angle(-0.5 - 2.0 * PI) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn quarter_circle() {
        let (x, y, th) = arc_step(0.0, 0.0, 0.0, 1.0, 1.0, FRAC_PI_2);
        assert!((x - 1.0).abs() < 1e-9 && (y - 1.0).abs() < 1e-9 && (th - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn tiny_omega_converges_to_line() {
        let a = arc_step(0.2, -0.1, 0.7, 0.5, 1e-8, 0.05);
        // 1e-8 is below the straight-line threshold, so compare against the
        // arc formula evaluated directly.
        let r = 0.5 / 1e-8;
        let th1: f64 = 0.7 + 1e-8 * 0.05;
        let arc = (0.2 + r * (th1.sin() - 0.7f64.sin()), -0.1 - r * (th1.cos() - 0.7f64.cos()));
        assert!((a.0 - arc.0).abs() < 1e-6 && (a.1 - arc.1).abs() < 1e-6);
    }
}
