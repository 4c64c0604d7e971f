//! Planar vectors, symmetric 2x2 covariances, and their eigenstructure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for symmetry and positive semi-definiteness checks.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("matrix is not symmetric: |{0} - {1}| exceeds tolerance")]
    NotSymmetric(f64, f64),
    #[error("matrix is not positive semi-definite: eigenvalue {0}")]
    NotPsd(f64),
    #[error("non-finite component")]
    NonFinite,
}

/// A position or displacement in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Angle of this vector from the +x axis, radians in (-pi, pi].
    pub fn bearing(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn rotated(self, angle_rad: f64) -> Vec2 {
        let (s, c) = angle_rad.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// A symmetric positive semi-definite 2x2 covariance, in meters^2.
///
/// Construction validates symmetry (within [`PSD_TOL`]) and clamps
/// eigenvalues in [-PSD_TOL, 0) to zero; anything more negative is
/// rejected as a contract violation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    xx: f64,
    xy: f64,
    yy: f64,
}

impl Cov2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Result<Self, GeometryError> {
        let c = Cov2 { xx, xy, yy };
        if !(xx.is_finite() && xy.is_finite() && yy.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        let (_, lo) = c.eigenvalues_raw();
        if lo < -PSD_TOL {
            return Err(GeometryError::NotPsd(lo));
        }
        Ok(c)
    }

    /// Builds from a full matrix, rejecting asymmetric input.
    pub fn from_matrix(m: [[f64; 2]; 2]) -> Result<Self, GeometryError> {
        if (m[0][1] - m[1][0]).abs() > PSD_TOL {
            return Err(GeometryError::NotSymmetric(m[0][1], m[1][0]));
        }
        Cov2::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1])
    }

    /// Isotropic covariance sigma^2 * I.
    pub fn isotropic(sigma: f64) -> Self {
        Cov2 {
            xx: sigma * sigma,
            xy: 0.0,
            yy: sigma * sigma,
        }
    }

    /// diag(var_u, var_v) expressed in a frame rotated by `angle_rad`.
    pub fn from_axis_aligned(var_u: f64, var_v: f64, angle_rad: f64) -> Self {
        let (s, c) = angle_rad.sin_cos();
        Cov2 {
            xx: c * c * var_u + s * s * var_v,
            xy: s * c * (var_u - var_v),
            yy: s * s * var_u + c * c * var_v,
        }
    }

    pub fn xx(&self) -> f64 {
        self.xx
    }
    pub fn xy(&self) -> f64 {
        self.xy
    }
    pub fn yy(&self) -> f64 {
        self.yy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    fn eigenvalues_raw(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let radius = half_diff.hypot(self.xy);
        (mean + radius, mean - radius)
    }

    /// Eigenvalues sorted descending, clamped to be non-negative.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let (hi, lo) = self.eigenvalues_raw();
        (hi.max(0.0), lo.max(0.0))
    }

    /// sqrt of the trace: the combined per-axis error magnitude.
    pub fn hypotenuse(&self) -> f64 {
        self.trace().max(0.0).sqrt()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Cov2 {
            xx: self.xx * k,
            xy: self.xy * k,
            yy: self.yy * k,
        }
    }

    /// R * C * R^T for a rotation by `angle_rad`.
    pub fn rotated(&self, angle_rad: f64) -> Self {
        let (s, c) = angle_rad.sin_cos();
        let (a, b, d) = (self.xx, self.xy, self.yy);
        Cov2 {
            xx: c * c * a - 2.0 * s * c * b + s * s * d,
            xy: s * c * (a - d) + (c * c - s * s) * b,
            yy: s * s * a + 2.0 * s * c * b + c * c * d,
        }
    }

    pub fn add(&self, other: &Cov2) -> Self {
        Cov2 {
            xx: self.xx + other.xx,
            xy: self.xy + other.xy,
            yy: self.yy + other.yy,
        }
    }

    /// Inverse-covariance (information) merge of two estimates.
    ///
    /// Returns the merged covariance A*(A+B)^-1*B and the weight matrix
    /// W = B*(A+B)^-1 applied to `self`'s mean, i.e.
    /// merged_mean = W*mu_a + (I-W)*mu_b.
    pub fn information_merge(&self, other: &Cov2) -> (Cov2, [[f64; 2]; 2]) {
        let sum = self.add(other);
        let det = sum.det().max(1e-300);
        let inv = [
            [sum.yy / det, -sum.xy / det],
            [-sum.xy / det, sum.xx / det],
        ];
        let a = [[self.xx, self.xy], [self.xy, self.yy]];
        let b = [[other.xx, other.xy], [other.xy, other.yy]];
        let w = mat_mul(&b, &inv);
        let merged = mat_mul(&mat_mul(&a, &inv), &b);
        (
            Cov2 {
                xx: merged[0][0],
                xy: 0.5 * (merged[0][1] + merged[1][0]),
                yy: merged[1][1],
            },
            w,
        )
    }

    /// Solves C * x = v, falling back to a tiny ridge when near-singular.
    pub fn solve(&self, v: Vec2) -> Vec2 {
        let mut det = self.det();
        let (mut xx, mut yy) = (self.xx, self.yy);
        if det.abs() < 1e-300 {
            xx += 1e-12;
            yy += 1e-12;
            det = xx * yy - self.xy * self.xy;
        }
        Vec2::new(
            (yy * v.x - self.xy * v.y) / det,
            (xx * v.y - self.xy * v.x) / det,
        )
    }

    /// Squared Mahalanobis distance of `v` under this covariance.
    pub fn mahalanobis_sq(&self, v: Vec2) -> f64 {
        v.dot(self.solve(v))
    }
}

/// Eigenvalues of a covariance sorted descending.
///
/// The sorted pair satisfies l0 + l1 = trace and l0 * l1 = det. Asymmetric
/// raw input is rejected at [`Cov2::from_matrix`] construction.
pub fn eig_sorted(cov: &Cov2) -> (f64, f64) {
    cov.eigenvalues()
}

fn mat_mul(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}
