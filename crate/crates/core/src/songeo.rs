//! Bi-invariant geometry of SO(n). Tangent vectors use the Lie-algebra
//! representation (skew-symmetric matrices); the metric is the Frobenius
//! product, transport is the identity, `Log_R S = log(Rᵀ S)`, the projection
//! is `skew(Rᵀ U)` and the retraction is the Q factor of `R + R A`.

use std::ops::Deref;

use crate::error::{shape_err, Error, Result};
use crate::symlin::{eig_mat, frob_norm, sym, Mat};

/// Angles within this distance of π have an ambiguous logarithm.
pub const EPS_PI: f64 = 1e-6;

/// Below this angle the logarithm uses its Taylor expansion.
pub const SMALL_ANGLE: f64 = 1e-4;

const ORTH_TOL: f64 = 1e-10;
const DET_TOL: f64 = 1e-8;
const SKEW_TOL: f64 = 1e-12;

/// Element of so(n).
#[derive(Clone, Debug, PartialEq)]
pub struct SkewMatrix(Mat);

impl SkewMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(shape_err("square", format!("{}x{}", m.nrows(), m.ncols())));
        }
        let residual = frob_norm(&(&m + m.transpose()));
        if residual > SKEW_TOL * (1.0 + frob_norm(&m)) {
            return Err(Error::NotSkew { residual });
        }
        Ok(Self::skew_part(&m))
    }

    /// `(A - Aᵀ) / 2`.
    pub fn skew_part(m: &Mat) -> Self {
        Self((m - m.transpose()) * 0.5)
    }

    pub fn zeros(n: usize) -> Self {
        Self(Mat::zeros(n, n))
    }

    pub(crate) fn from_mat_unchecked(m: Mat) -> Self {
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_inner(self) -> Mat {
        self.0
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(&self.0 * a)
    }
}

impl Deref for SkewMatrix {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}

/// Element of SO(n).
#[derive(Clone, Debug, PartialEq)]
pub struct RotationMatrix(Mat);

impl RotationMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() || n == 0 {
            return Err(shape_err("square", format!("{}x{}", m.nrows(), m.ncols())));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let orth = frob_norm(&(m.transpose() * &m - Mat::identity(n, n)));
        let det = m.determinant();
        if orth > ORTH_TOL || (det - 1.0).abs() > DET_TOL {
            return Err(Error::NotRotation { orth, det });
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    pub fn from_mat_unchecked(m: Mat) -> Self {
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_inner(self) -> Mat {
        self.0
    }

    /// Group inverse.
    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &RotationMatrix) -> Self {
        Self(&self.0 * &other.0)
    }
}

impl Deref for RotationMatrix {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}

/// `ŵ` with `ŵ x = w × x`.
pub fn hat(w: &[f64; 3]) -> Mat {
    Mat::from_row_slice(3, 3, &[0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0])
}

pub fn vee(a: &Mat) -> [f64; 3] {
    [a[(2, 1)], a[(0, 2)], a[(1, 0)]]
}

/// Rotation by `angle` about the z axis.
pub fn rot_z(angle: f64) -> RotationMatrix {
    let (s, c) = angle.sin_cos();
    RotationMatrix(Mat::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]))
}

/// Rodrigues exponential of a 3×3 skew matrix.
pub fn so3_exp(w: &Mat) -> RotationMatrix {
    let v = vee(w);
    let t2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    let t = t2.sqrt();
    let (a, b) = if t < SMALL_ANGLE {
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        (t.sin() / t, (1.0 - t.cos()) / t2)
    };
    RotationMatrix(Mat::identity(3, 3) + w * a + (w * w) * b)
}

fn check3(r: &Mat) -> Result<()> {
    if r.nrows() != 3 || r.ncols() != 3 {
        return Err(shape_err("3x3", format!("{}x{}", r.nrows(), r.ncols())));
    }
    Ok(())
}

/// `(sin θ, cos θ)` from the antisymmetric part and the trace; the angle
/// `atan2(sin, cos)` equals `arccos((tr R - 1) / 2)` but stays accurate near 0 and π.
fn sin_cos(r: &Mat) -> (f64, f64) {
    let w = vee(&(r - r.transpose()));
    let s = 0.5 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let c = 0.5 * (r.trace() - 1.0);
    (s, c)
}

/// Euler angle `θ(R) = arccos((tr R - 1) / 2) ∈ [0, π]`.
pub fn euler_angle(r: &RotationMatrix) -> Result<f64> {
    check3(r)?;
    let (s, c) = sin_cos(r);
    Ok(s.atan2(c))
}

/// Unit rotation axis `ω(R)`; undefined at angles 0 and π.
pub fn euler_axis(r: &RotationMatrix) -> Result<[f64; 3]> {
    let angle = euler_angle(r)?;
    let sin = angle.sin();
    if sin.abs() < 1e-10 {
        return Err(Error::DegenerateAngle { angle });
    }
    let d = 2.0 * sin;
    Ok([(r[(2, 1)] - r[(1, 2)]) / d, (r[(0, 2)] - r[(2, 0)]) / d, (r[(1, 0)] - r[(0, 1)]) / d])
}

/// Principal logarithm on SO(3) without a decomposition:
/// `θ / (2 sin θ) · (R - Rᵀ)`, with a Taylor guard for small θ.
pub fn so3_log(r: &RotationMatrix) -> Result<SkewMatrix> {
    check3(r)?;
    let (s, c) = sin_cos(r);
    let angle = s.atan2(c);
    if angle > std::f64::consts::PI - EPS_PI {
        return Err(Error::NearPiBranch { angle, eps: EPS_PI });
    }
    let anti = &r.0 - r.0.transpose();
    let k = if angle < SMALL_ANGLE { 0.5 * (1.0 + angle * angle / 6.0) } else { angle / (2.0 * s) };
    Ok(SkewMatrix(anti * k))
}

/// Riemannian logarithm `Log_R S = log(Rᵀ S)`.
pub fn so_log(r: &RotationMatrix, s: &RotationMatrix) -> Result<SkewMatrix> {
    if r.dim() != s.dim() {
        return Err(shape_err(r.dim(), s.dim()));
    }
    let x = RotationMatrix(r.transpose() * &s.0);
    if x.dim() == 3 {
        so3_log(&x)
    } else {
        so_log_generic(&x)
    }
}

fn sqrtm_denman_beavers(a: &Mat) -> Result<Mat> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = Mat::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().ok_or(Error::LogNotConverged { residual: f64::INFINITY })?;
        let zi = z.clone().try_inverse().ok_or(Error::LogNotConverged { residual: f64::INFINITY })?;
        let y_next = (&y + zi) * 0.5;
        let z_next = (&z + yi) * 0.5;
        let delta = frob_norm(&(&y_next - &y));
        y = y_next;
        z = z_next;
        if delta <= 1e-15 * frob_norm(&y) {
            return Ok(y);
        }
    }
    Err(Error::LogNotConverged { residual: frob_norm(&(&y * &y - a)) })
}

/// Principal logarithm of a rotation of any dimension by inverse scaling and
/// squaring (Denman-Beavers square roots, then the Mercator series).
pub fn so_log_generic(x: &RotationMatrix) -> Result<SkewMatrix> {
    let n = x.dim();
    // eigenvalues of the symmetric part are the cosines of the rotation angles
    let cos_min = eig_mat(&sym(x))?.sigma[n - 1];
    if cos_min < -(EPS_PI.cos()) {
        return Err(Error::NearPiBranch { angle: cos_min.clamp(-1.0, 1.0).acos(), eps: EPS_PI });
    }
    let id = Mat::identity(n, n);
    let mut y = x.0.clone();
    let mut k = 0;
    while frob_norm(&(&y - &id)) > 0.05 {
        if k >= 64 {
            return Err(Error::LogNotConverged { residual: frob_norm(&(&y - &id)) });
        }
        y = sqrtm_denman_beavers(&y)?;
        k += 1;
    }
    let e = &y - &id;
    let mut term = e.clone();
    let mut acc = Mat::zeros(n, n);
    for m in 1..200 {
        let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
        acc += &term * (sign / m as f64);
        if frob_norm(&term) < 1e-18 {
            break;
        }
        term = &term * &e;
    }
    Ok(SkewMatrix::skew_part(&(acc * 2f64.powi(k))))
}

/// Projection of an ambient matrix onto the tangent space at `R`, in the
/// Lie-algebra representation: `skew(Rᵀ U)`.
pub fn so_project(r: &RotationMatrix, u: &Mat) -> SkewMatrix {
    SkewMatrix::skew_part(&(r.transpose() * u))
}

/// QR retraction `qr(R + R A)`, sign-fixed so the triangular factor has a
/// positive diagonal.
pub fn so_retract(r: &RotationMatrix, a: &SkewMatrix) -> RotationMatrix {
    let n = r.dim();
    let m = &r.0 + &r.0 * &a.0;
    let qr = m.qr();
    let (mut q, rr) = (qr.q(), qr.r());
    for j in 0..n {
        if rr[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        q.column_mut(n - 1).neg_mut();
    }
    RotationMatrix(q)
}
