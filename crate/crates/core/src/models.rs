//! The two model systems: the Henon-Heiles potential and the ripple billiard.
//!
//! Units throughout: m = 1/2, hbar = 1, so `H = p^2 + V`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{Grid2D, RealField};

/// Mass used everywhere in this crate.
pub const MASS: f64 = 0.5;

/// A smooth scalar potential.
pub trait Potential: Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn gradient(&self, x: f64, y: f64) -> (f64, f64);

    fn sample(&self, grid: &Grid2D) -> RealField
    where
        Self: Sized,
    {
        RealField::from_fn(*grid, |x, y| self.value(x, y))
    }
}

/// `V = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreeSpace;

impl Potential for FreeSpace {
    fn value(&self, _x: f64, _y: f64) -> f64 {
        0.0
    }
    fn gradient(&self, _x: f64, _y: f64) -> (f64, f64) {
        (0.0, 0.0)
    }
}

/// Isotropic oscillator `V = k (x^2 + y^2) / 2`.
#[derive(Debug, Clone, Copy)]
pub struct Harmonic {
    pub stiffness: f64,
}

impl Potential for Harmonic {
    fn value(&self, x: f64, y: f64) -> f64 {
        0.5 * self.stiffness * (x * x + y * y)
    }
    fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        (self.stiffness * x, self.stiffness * y)
    }
}

/// `V(x, y) = U/2 (x^2 + y^2) + lambda (x^2 y - y^3 / 3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HenonHeiles {
    pub u: f64,
    pub lambda: f64,
}

impl Default for HenonHeiles {
    /// `U = 1, lambda = 0.05`: `r_c = 20`, `V_c = 200/3`.
    fn default() -> Self {
        Self { u: 1.0, lambda: 0.05 }
    }
}

/// Stationary points of the Henon-Heiles potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoints {
    pub origin: (f64, f64),
    pub saddle_a: (f64, f64),
    pub saddle_b: (f64, f64),
    pub saddle_c: (f64, f64),
    pub saddle_energy: f64,
}

impl HenonHeiles {
    pub fn new(u: f64, lambda: f64) -> Result<Self> {
        if !(u > 0.0 && lambda > 0.0 && u.is_finite() && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Henon-Heiles needs U > 0 and lambda > 0, got U = {u}, lambda = {lambda}"
            )));
        }
        Ok(Self { u, lambda })
    }

    /// Saddle distance `U / lambda`.
    pub fn r_c(&self) -> f64 {
        self.u / self.lambda
    }

    /// Escape energy `U^3 / (6 lambda^2)`.
    pub fn v_c(&self) -> f64 {
        self.u.powi(3) / (6.0 * self.lambda * self.lambda)
    }

    /// Momentum scale `sqrt(2 m V_c)`.
    pub fn p0(&self) -> f64 {
        (2.0 * MASS * self.v_c()).sqrt()
    }

    /// Characteristic time `r_c / (p0 / 2m)`.
    pub fn t_char(&self) -> f64 {
        self.r_c() / (self.p0() / (2.0 * MASS))
    }

    /// Half-width of the hard-wall confinement box.
    pub fn box_half_width(&self) -> f64 {
        2.5 * self.r_c()
    }

    pub fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let l = self.lambda;
        [[self.u + 2.0 * l * y, 2.0 * l * x], [2.0 * l * x, self.u - 2.0 * l * y]]
    }

    pub fn critical_points(&self) -> CriticalPoints {
        let rc = self.r_c();
        let h = 0.5 * 3f64.sqrt() * rc;
        CriticalPoints {
            origin: (0.0, 0.0),
            saddle_a: (0.0, rc),
            saddle_b: (-h, -0.5 * rc),
            saddle_c: (h, -0.5 * rc),
            saddle_energy: self.v_c(),
        }
    }
}

impl Potential for HenonHeiles {
    fn value(&self, x: f64, y: f64) -> f64 {
        0.5 * self.u * (x * x + y * y) + self.lambda * (x * x * y - y * y * y / 3.0)
    }

    fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.u * x + 2.0 * self.lambda * x * y,
            self.u * y + self.lambda * (x * x - y * y),
        )
    }
}

/// Hard-wall domain `0 <= y <= 2b`, `|x| <= b - a cos(pi y / b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RippleBilliard {
    pub a: f64,
    pub b: f64,
}

/// Tolerance for deciding that a point sits on the wall.
pub const WALL_TOLERANCE: f64 = 1e-8;

impl RippleBilliard {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0 && b > 0.0 && a < b && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ripple billiard needs 0 <= a < b, got a = {a}, b = {b}"
            )));
        }
        Ok(Self { a, b })
    }

    /// Side-wall abscissa `b - a cos(pi y / b)`.
    pub fn half_width(&self, y: f64) -> f64 {
        self.b - self.a * (PI * y / self.b).cos()
    }

    /// `d(half_width)/dy`.
    pub fn half_width_slope(&self, y: f64) -> f64 {
        self.a * PI / self.b * (PI * y / self.b).sin()
    }

    pub fn height(&self) -> f64 {
        2.0 * self.b
    }

    pub fn center(&self) -> (f64, f64) {
        (0.0, self.b)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        (0.0..=2.0 * self.b).contains(&y) && x.abs() <= self.half_width(y)
    }

    /// Signed distance-like boundary function, negative inside. Zero on
    /// every wall.
    pub fn boundary_function(&self, x: f64, y: f64) -> f64 {
        let side = x.abs() - self.half_width(y);
        let bottom = -y;
        let top = y - 2.0 * self.b;
        side.max(bottom).max(top)
    }

    /// Outward unit normal at a point within `WALL_TOLERANCE` of the wall.
    pub fn wall_normal(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        let side_gap = (x.abs() - self.half_width(y)).abs();
        let on_side = side_gap <= WALL_TOLERANCE && (-WALL_TOLERANCE..=2.0 * self.b + WALL_TOLERANCE).contains(&y);
        let on_bottom = y.abs() <= WALL_TOLERANCE && x.abs() <= self.half_width(0.0) + WALL_TOLERANCE;
        let on_top = (y - 2.0 * self.b).abs() <= WALL_TOLERANCE
            && x.abs() <= self.half_width(2.0 * self.b) + WALL_TOLERANCE;

        // corners resolve to the flat wall
        if on_bottom {
            return Ok((0.0, -1.0));
        }
        if on_top {
            return Ok((0.0, 1.0));
        }
        if on_side {
            let sx = if x >= 0.0 { 1.0 } else { -1.0 };
            let ny = -self.half_width_slope(y);
            let len = (1.0 + ny * ny).sqrt();
            return Ok((sx / len, ny / len));
        }
        Err(Error::NotOnWall { x, y })
    }

    pub fn area(&self) -> f64 {
        4.0 * self.b * self.b
    }

    /// Arc length of one side wall, by composite Simpson quadrature.
    pub fn side_wall_length(&self) -> f64 {
        let n = 2000;
        let h = 2.0 * self.b / n as f64;
        let f = |y: f64| (1.0 + self.half_width_slope(y).powi(2)).sqrt();
        let mut s = f(0.0) + f(2.0 * self.b);
        for k in 1..n {
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(k as f64 * h);
        }
        s * h / 3.0
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * self.side_wall_length() + 2.0 * self.half_width(0.0) + 2.0 * self.half_width(2.0 * self.b)
    }

    /// Two-term Weyl estimate of the number of Dirichlet levels below `e`
    /// (m = 1/2 so `E = k^2`).
    pub fn weyl_count(&self, e: f64) -> f64 {
        if e <= 0.0 {
            return 0.0;
        }
        (self.area() * e - self.perimeter() * e.sqrt()) / (4.0 * PI)
    }

    /// Inverse of [`weyl_count`](Self::weyl_count) by bisection.
    pub fn weyl_energy(&self, count: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1.0);
        while self.weyl_count(hi) < count {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.weyl_count(mid) < count {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Classical traversal period `2(a + b) / (|p| / m)`.
    pub fn traversal_period(&self, speed_p: f64) -> f64 {
        2.0 * (self.a + self.b) / (speed_p / MASS)
    }

    /// Uniform-density `y` marginal `(b - a cos(pi y / b)) / (2 b^2)`.
    pub fn uniform_y_marginal(&self, y: f64) -> f64 {
        if (0.0..=2.0 * self.b).contains(&y) {
            self.half_width(y) / (2.0 * self.b * self.b)
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scales() {
        let hh = HenonHeiles::default();
        assert_eq!(hh.r_c(), 20.0);
        assert!((hh.v_c() - 200.0 / 3.0).abs() < 1e-12);
        assert!((hh.p0() - (200.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((hh.p0() - 8.165).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HenonHeiles::new(0.0, 1.0).is_err());
        assert!(HenonHeiles::new(1.0, -1.0).is_err());
        assert!(RippleBilliard::new(15.0, 15.0).is_err());
        assert!(RippleBilliard::new(-1.0, 15.0).is_err());
        assert!(RippleBilliard::new(0.0, 15.0).is_ok());
    }

    #[test]
    fn potential_values_at_critical_points() {
        let hh = HenonHeiles::default();
        let rc = hh.r_c();
        assert_eq!(hh.value(0.0, 0.0), 0.0);
        assert!((hh.value(0.0, rc) - hh.v_c()).abs() < 1e-12 * hh.v_c());
        let (bx, by) = (-(3f64.sqrt() / 2.0) * rc, -rc / 2.0);
        assert!((hh.value(bx, by) - hh.v_c()).abs() < 1e-12 * hh.v_c());
    }

    #[test]
    fn gradients_vanish_at_critical_points() {
        for hh in [HenonHeiles::default(), HenonHeiles::new(2.0, 0.3).unwrap()] {
            let cp = hh.critical_points();
            for (x, y) in [cp.origin, cp.saddle_a, cp.saddle_b, cp.saddle_c] {
                let (gx, gy) = hh.gradient(x, y);
                assert!(gx.hypot(gy) < 1e-12, "gradient at ({x}, {y})");
                assert!((x, y) == cp.origin || (hh.value(x, y) - cp.saddle_energy).abs() < 1e-10);
            }
        }
        assert_eq!(HenonHeiles::default().critical_points().saddle_a, (0.0, 20.0));
    }

    #[test]
    fn hessian_signatures() {
        let hh = HenonHeiles::default();
        let det = |m: [[f64; 2]; 2]| m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let o = hh.hessian(0.0, 0.0);
        assert!(o[0][0] > 0.0 && det(o) > 0.0);
        let cp = hh.critical_points();
        for s in [cp.saddle_a, cp.saddle_b, cp.saddle_c] {
            assert!(det(hh.hessian(s.0, s.1)) < 0.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let hh = HenonHeiles::new(1.3, 0.07).unwrap();
        let h = 1e-6;
        for &(x, y) in &[(1.0, 2.0), (-3.0, 0.5), (4.0, -6.0)] {
            let (gx, gy) = hh.gradient(x, y);
            let fx = (hh.value(x + h, y) - hh.value(x - h, y)) / (2.0 * h);
            let fy = (hh.value(x, y + h) - hh.value(x, y - h)) / (2.0 * h);
            assert!((gx - fx).abs() < 1e-6 && (gy - fy).abs() < 1e-6);
        }
    }

    #[test]
    fn billiard_membership() {
        let rb = RippleBilliard::new(6.0, 15.0).unwrap();
        assert!(rb.contains(0.0, 15.0));
        assert!(!rb.contains(9.5, 0.0));
        assert!(rb.contains(20.9, 15.0));
        assert!(!rb.contains(21.1, 15.0));
        assert!(!rb.contains(0.0, -0.1));
        assert!(!rb.contains(0.0, 30.1));
    }

    #[test]
    fn wall_normals() {
        let rb = RippleBilliard::new(6.0, 15.0).unwrap();
        // right wall at mid-height, where the slope vanishes
        let (nx, ny) = rb.wall_normal(21.0, 15.0).unwrap();
        assert!((nx - 1.0).abs() < 1e-12 && ny.abs() < 1e-12);
        assert_eq!(rb.wall_normal(0.0, 30.0).unwrap(), (0.0, 1.0));
        assert_eq!(rb.wall_normal(3.0, 0.0).unwrap(), (0.0, -1.0));
        // y = b/2: implicit-function gradient (1, -a pi / b)
        let y = 7.5;
        let (nx, ny) = rb.wall_normal(-rb.half_width(y), y).unwrap();
        let s = (1.0 + (6.0 * PI / 15.0f64).powi(2)).sqrt();
        assert!((nx + 1.0 / s).abs() < 1e-12 && (ny + 6.0 * PI / 15.0 / s).abs() < 1e-12);
        let (nx, ny) = rb.wall_normal(rb.half_width(y), y).unwrap();
        assert!((nx - 1.0 / s).abs() < 1e-12 && (ny + 6.0 * PI / 15.0 / s).abs() < 1e-12);
        assert!(rb.wall_normal(0.0, 15.0).is_err());
    }

    #[test]
    fn weyl_inverse() {
        let rb = RippleBilliard::new(6.0, 15.0).unwrap();
        let e = rb.weyl_energy(600.0);
        assert!((rb.weyl_count(e) - 600.0).abs() < 1e-8);
        assert!((e - 8.7565).abs() < 1e-3);
    }

    #[test]
    fn uniform_y_marginal_integrates_to_one() {
        let rb = RippleBilliard::new(6.0, 15.0).unwrap();
        let n = 3000;
        let h = 30.0 / n as f64;
        let s: f64 = (0..n).map(|k| rb.uniform_y_marginal((k as f64 + 0.5) * h)).sum::<f64>() * h;
        assert!((s - 1.0).abs() < 1e-6);
    }
}
