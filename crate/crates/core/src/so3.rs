//! Vector/matrix helpers on SO(3) and the quaternion attitude error.
//!
//! `Vec3` and `Mat3` are plain nalgebra types. [`Rotation`] is a checked
//! wrapper that keeps `RᵀR = I`, and [`ErrorQuaternion`] is always stored
//! scalar-positive so the half-angle square root is single-valued.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Absolute tolerance used for the skew-symmetry and orthogonality checks.
pub const SO3_TOL: f64 = 1e-9;

/// `tr(R̃)` must exceed `-1 + SINGULAR_TRACE_MARGIN` for the error quaternion.
pub const SINGULAR_TRACE_MARGIN: f64 = 1e-6;

/// `|det Q|` below this is treated as singular.
pub const Q_DET_GUARD: f64 = 1e-6;

/// Skew-symmetric matrix `[v]×`, so that `hat(v) * w == v.cross(&w)`.
#[inline]
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part is not ~zero.
pub fn vee(m: &Mat3) -> Result<Vec3> {
    let residual = (m + m.transpose()).amax();
    if !(residual <= SO3_TOL * m.amax().max(1.0)) {
        return Err(Error::NonSkewInput { residual });
    }
    Ok(vee_unchecked(m))
}

/// Vee of the skew-symmetric part `½(M − Mᵀ)`. Used where `M` is only
/// approximately skew, e.g. a finite-difference estimate of `RᵀṘ`.
#[inline]
pub fn vee_skew_part(m: &Mat3) -> Vec3 {
    0.5 * Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)])
}

#[inline]
fn vee_unchecked(m: &Mat3) -> Vec3 {
    Vec3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

pub fn det3(m: &Mat3) -> f64 {
    m[(0, 0)] * (m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)])
        - m[(0, 1)] * (m[(1, 0)] * m[(2, 2)] - m[(1, 2)] * m[(2, 0)])
        + m[(0, 2)] * (m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)])
}

/// Classical adjugate (transpose of the cofactor matrix).
pub fn adjugate3(m: &Mat3) -> Mat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| {
        m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)]
    };
    Mat3::new(
        c(1, 2, 1, 2),
        -c(0, 2, 1, 2),
        c(0, 1, 1, 2),
        -c(1, 2, 0, 2),
        c(0, 2, 0, 2),
        -c(0, 1, 0, 2),
        c(1, 2, 0, 1),
        -c(0, 2, 0, 1),
        c(0, 1, 0, 1),
    )
}

/// A matrix in SO(3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation(Mat3);

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Checked constructor: orthogonality and unit determinant within [`SO3_TOL`].
    pub fn from_matrix(m: Mat3) -> Option<Self> {
        let ortho = (m.transpose() * m - Mat3::identity()).amax();
        let det = det3(&m);
        (ortho <= SO3_TOL && (det - 1.0).abs() <= SO3_TOL && m.iter().all(|x| x.is_finite()))
            .then_some(Rotation(m))
    }

    /// Projects an approximately orthogonal matrix back onto SO(3).
    ///
    /// Uses the symmetric Newton iteration `R ← ½R(3I − RᵀR)` towards the
    /// polar factor; two passes are enough for drift of a few ulps per step.
    pub fn orthonormalized(m: Mat3) -> Self {
        let mut r = m;
        for _ in 0..3 {
            let err = r.transpose() * r - Mat3::identity();
            if err.amax() < 1e-15 {
                break;
            }
            r = r * (Mat3::identity() * 1.5 - 0.5 * (r.transpose() * r));
        }
        Rotation(r)
    }

    /// Rodrigues formula.
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let k = hat(&(axis / n));
        Rotation(Mat3::identity() + angle.sin() * k + (1.0 - angle.cos()) * k * k)
    }

    /// Z-Y-X (yaw, pitch, roll) composition.
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let rz = Self::from_axis_angle(&Vec3::z(), yaw);
        let ry = Self::from_axis_angle(&Vec3::y(), pitch);
        let rx = Self::from_axis_angle(&Vec3::x(), roll);
        Rotation(rz.0 * ry.0 * rx.0)
    }

    /// Wraps a matrix without any check; for intermediate integrator stages.
    #[inline]
    pub(crate) fn from_raw_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    #[inline]
    pub fn transpose(&self) -> Rotation {
        Rotation(self.0.transpose())
    }

    #[inline]
    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }

    /// `‖RᵀR − I‖_max`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).amax()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

/// Unit quaternion `[q0, qv]` of an attitude error, with `q0 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorQuaternion {
    pub q0: f64,
    pub qv: Vec3,
}

impl ErrorQuaternion {
    pub fn identity() -> Self {
        ErrorQuaternion { q0: 1.0, qv: Vec3::zeros() }
    }

    pub fn norm(&self) -> f64 {
        (self.q0 * self.q0 + self.qv.norm_squared()).sqrt()
    }

    /// Rotation matrix of the quaternion (Euler–Rodrigues form).
    pub fn to_rotation(&self) -> Rotation {
        let (w, v) = (self.q0, self.qv);
        let m = Mat3::identity() * (w * w - v.norm_squared())
            + 2.0 * v * v.transpose()
            + 2.0 * w * hat(&v);
        Rotation(m)
    }
}

/// Attitude error quaternion of `R̃`:
/// `q0 = ½√(1 + tr R̃)`, `qv = vee(R̃ − R̃ᵀ) / (4 q0)`.
pub fn error_quaternion(rot_err: &Rotation) -> Result<ErrorQuaternion> {
    let trace = rot_err.trace();
    if !(trace > -1.0 + SINGULAR_TRACE_MARGIN) {
        return Err(Error::NearSingularAttitude { trace });
    }
    let m = rot_err.matrix();
    let q0 = 0.5 * (1.0 + trace).sqrt();
    let qv = vee_unchecked(&(m - m.transpose())) / (4.0 * q0);
    Ok(ErrorQuaternion { q0, qv })
}

/// `Q = q0·E3 + [qv]×`, the map with `d/dt qv = ½ Q ω̃`.
pub fn q_matrix(q: &ErrorQuaternion) -> Mat3 {
    Mat3::identity() * q.q0 + hat(&q.qv)
}

/// `Q⁻¹` through the adjugate, guarded on `|det Q|`.
pub fn q_matrix_inverse(q: &ErrorQuaternion) -> Result<Mat3> {
    let qm = q_matrix(q);
    let det = det3(&qm);
    if det.abs() < Q_DET_GUARD {
        return Err(Error::NearSingularAttitude { trace: 4.0 * q.q0 * q.q0 - 1.0 });
    }
    Ok(adjugate3(&qm) / det)
}

/// Induced 2-norm of a 3×3 matrix (largest singular value).
pub fn spectral_norm(m: &Mat3) -> f64 {
    let ata = m.transpose() * m;
    ata.symmetric_eigenvalues().max().max(0.0).sqrt()
}
