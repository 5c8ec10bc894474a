//! Minimal fixed-size algebra for the plane: [`Vec2`] and [`Mat2`].
//!
//! Everything here is `Copy`, allocation-free, and deliberately small —
//! the material model and both solvers only ever need 2-vectors and 2×2
//! matrices, so a handful of inherent methods beats pulling in a general
//! linear-algebra dependency.

use serde::{Deserialize, Serialize};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Tolerance below which a 2×2 determinant is treated as singular by
/// [`Mat2::inverse`].
pub const SINGULAR_TOL: f64 = 1e-12;

/// Column vector in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector at angle `phi` from the x-axis: `(cos φ, sin φ)`.
    pub fn from_angle(phi: f64) -> Self {
        Vec2::new(phi.cos(), phi.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    /// Counter-clockwise quarter turn: `(-y, x)`.
    ///
    /// For a unit director `d` this is the unique (up to sign) unit vector
    /// orthogonal to `d`; rank-one director perturbations live along it.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Outer product `self ⊗ other`.
    pub fn outer(self, other: Vec2) -> Mat2 {
        Mat2::new(
            self.x * other.x,
            self.x * other.y,
            self.y * other.x,
            self.y * other.y,
        )
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// 2×2 matrix in row-major storage: entry `m_ij` is row `i`, column `j`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 {
        m11: 0.0,
        m12: 0.0,
        m21: 0.0,
        m22: 0.0,
    };

    pub const IDENTITY: Mat2 = Mat2 {
        m11: 1.0,
        m12: 0.0,
        m21: 0.0,
        m22: 1.0,
    };

    pub const fn new(m11: f64, m12: f64, m21: f64, m22: f64) -> Self {
        Mat2 { m11, m12, m21, m22 }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Mat2::new(a, 0.0, 0.0, b)
    }

    pub fn det(self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn trace(self) -> f64 {
        self.m11 + self.m22
    }

    pub fn transpose(self) -> Mat2 {
        Mat2::new(self.m11, self.m21, self.m12, self.m22)
    }

    /// Inverse via the adjugate; `None` when `|det| <=` [`SINGULAR_TOL`].
    pub fn inverse(self) -> Option<Mat2> {
        let det = self.det();
        if det.abs() <= SINGULAR_TOL {
            return None;
        }
        let inv_det = 1.0 / det;
        Some(Mat2::new(
            self.m22 * inv_det,
            -self.m12 * inv_det,
            -self.m21 * inv_det,
            self.m11 * inv_det,
        ))
    }

    /// Frobenius inner product `A : B = Σ a_ij b_ij`.
    pub fn frobenius_inner(self, other: Mat2) -> f64 {
        self.m11 * other.m11 + self.m12 * other.m12 + self.m21 * other.m21 + self.m22 * other.m22
    }

    pub fn frobenius_norm(self) -> f64 {
        self.frobenius_inner(self).sqrt()
    }

    /// Matrix-vector product (column-vector convention).
    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m11 * v.x + self.m12 * v.y,
            self.m21 * v.x + self.m22 * v.y,
        )
    }

    /// Column `j` (0-based) as a vector.
    pub fn col(self, j: usize) -> Vec2 {
        match j {
            0 => Vec2::new(self.m11, self.m21),
            1 => Vec2::new(self.m12, self.m22),
            _ => panic!("Mat2 column index out of range: {j}"),
        }
    }

    /// Rotation by `theta` radians (counter-clockwise).
    pub fn rotation(theta: f64) -> Mat2 {
        let (s, c) = theta.sin_cos();
        Mat2::new(c, -s, s, c)
    }

    /// Skew part `(A - Aᵀ)/2`.
    pub fn skew_part(self) -> Mat2 {
        let off = 0.5 * (self.m12 - self.m21);
        Mat2::new(0.0, off, -off, 0.0)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 + rhs.m11,
            self.m12 + rhs.m12,
            self.m21 + rhs.m21,
            self.m22 + rhs.m22,
        )
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, rhs: Mat2) {
        self.m11 += rhs.m11;
        self.m12 += rhs.m12;
        self.m21 += rhs.m21;
        self.m22 += rhs.m22;
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 - rhs.m11,
            self.m12 - rhs.m12,
            self.m21 - rhs.m21,
            self.m22 - rhs.m22,
        )
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        Mat2::new(
            self.m11 * rhs.m11 + self.m12 * rhs.m21,
            self.m11 * rhs.m12 + self.m12 * rhs.m22,
            self.m21 * rhs.m11 + self.m22 * rhs.m21,
            self.m21 * rhs.m12 + self.m22 * rhs.m22,
        )
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(self.m11 * s, self.m12 * s, self.m21 * s, self.m22 * s)
    }
}

impl Mul<Mat2> for f64 {
    type Output = Mat2;
    fn mul(self, m: Mat2) -> Mat2 {
        m * self
    }
}
