//! Random matrices for tests, check suites and synthetic data.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::songeo::{RotationMatrix, SkewMatrix};
use crate::symlin::{Mat, SpdMatrix, SymmetricMatrix};

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Symmetric part of an i.i.d. normal matrix, scaled.
pub fn symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> SymmetricMatrix {
    SymmetricMatrix::symmetrize(&(gaussian(rng, n, n) * scale))
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    let qr = gaussian(rng, n, n).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// SPD matrix with random eigenvectors and log-uniform spectrum whose
/// condition number is exactly `cond` (for `n ≥ 2`).
pub fn spd<R: Rng + ?Sized>(rng: &mut R, n: usize, cond: f64) -> SpdMatrix {
    let q = orthogonal(rng, n);
    let lc = cond.ln();
    let mut logs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * lc - 0.5 * lc).collect();
    if n >= 2 {
        logs[0] = 0.5 * lc;
        logs[1] = -0.5 * lc;
    }
    let d = Mat::from_fn(n, n, |i, j| if i == j { logs[i].exp() } else { 0.0 });
    let m = &q * d * q.transpose();
    SpdMatrix::from_mat_unchecked((&m + m.transpose()) * 0.5)
}

/// SPD matrix with a prescribed spectrum and random eigenvectors.
pub fn spd_with_spectrum<R: Rng + ?Sized>(rng: &mut R, spectrum: &[f64]) -> SpdMatrix {
    let n = spectrum.len();
    let q = orthogonal(rng, n);
    let d = Mat::from_fn(n, n, |i, j| if i == j { spectrum[i] } else { 0.0 });
    let m = &q * d * q.transpose();
    SpdMatrix::from_mat_unchecked((&m + m.transpose()) * 0.5)
}

pub fn skew<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> SkewMatrix {
    let g = gaussian(rng, n, n) * scale;
    SkewMatrix::skew_part(&g)
}

/// Haar-distributed rotation.
pub fn rotation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> RotationMatrix {
    let mut q = orthogonal(rng, n);
    if q.determinant() < 0.0 {
        q.column_mut(0).neg_mut();
    }
    RotationMatrix::from_mat_unchecked(q)
}

/// Rotation of angle at most `max_angle` about a random axis (n = 3).
pub fn rotation3_bounded<R: Rng + ?Sized>(rng: &mut R, max_angle: f64) -> RotationMatrix {
    let axis = gaussian(rng, 3, 1);
    let axis = &axis / axis.norm();
    let angle = rng.random::<f64>() * max_angle;
    let w = crate::songeo::hat(&[axis[0] * angle, axis[1] * angle, axis[2] * angle]);
    crate::songeo::so3_exp(&w)
}
