use std::ops::Deref;

use nalgebra::DMatrix;

use super::{eig_sym, frob_norm};
use crate::error::{shape_err, Error, Result};

pub type Mat = DMatrix<f64>;

/// Relative Frobenius asymmetry accepted by [`SymmetricMatrix::new`].
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Floor used by the SPD domain check: the smallest eigenvalue must exceed
/// `SPD_EPS * (1 + largest eigenvalue)`.
pub const SPD_EPS: f64 = 1e-10;

fn check_square(m: &Mat) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(shape_err("non-empty square matrix", format!("{}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// An element of Sym(n), stored exactly symmetric.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetricMatrix(Mat);

impl SymmetricMatrix {
    /// Validates near-symmetry and stores the symmetric part.
    pub fn new(m: Mat) -> Result<Self> {
        check_square(&m)?;
        let scale = frob_norm(&m).max(f64::MIN_POSITIVE);
        let asym = frob_norm(&(&m - m.transpose())) / scale;
        if asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        Ok(Self::symmetrize(&m))
    }

    /// `(M + Mᵀ) / 2` of an arbitrary square matrix.
    pub fn symmetrize(m: &Mat) -> Self {
        Self((m + m.transpose()) * 0.5)
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(shape_err(n * n, data.len()));
        }
        Self::new(Mat::from_row_slice(n, n, data))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self(Mat::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 }))
    }

    pub fn zeros(n: usize) -> Self {
        Self(Mat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    /// Wraps a matrix the caller knows to be exactly symmetric.
    pub(crate) fn from_mat_unchecked(m: Mat) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
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

impl Deref for SymmetricMatrix {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}

/// A point of the open cone S++(n).
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix(Mat);

impl SpdMatrix {
    /// Validates symmetry and `λ_min > 1e-10 · (1 + λ_max)`.
    pub fn new(m: Mat) -> Result<Self> {
        let s = SymmetricMatrix::new(m)?;
        Self::from_symmetric(s)
    }

    pub fn from_symmetric(s: SymmetricMatrix) -> Result<Self> {
        let eig = eig_sym(&s)?;
        let n = eig.sigma.len();
        let (max, min) = (eig.sigma[0], eig.sigma[n - 1]);
        if !(min > SPD_EPS * (1.0 + max.abs())) {
            return Err(Error::NotPositiveDefinite { op: "spd check", index: n - 1, eigenvalue: min });
        }
        Ok(Self(s.0))
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(shape_err(n * n, data.len()));
        }
        Self::new(Mat::from_row_slice(n, n, data))
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::from_symmetric(SymmetricMatrix::from_diagonal(d))
    }

    pub fn identity(n: usize) -> Self {
        Self(Mat::identity(n, n))
    }

    /// Wraps a matrix that is SPD by construction (e.g. an exponential).
    /// The caller guarantees exact symmetry.
    pub fn from_mat_unchecked(m: Mat) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
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

    pub fn to_symmetric(&self) -> SymmetricMatrix {
        SymmetricMatrix(self.0.clone())
    }
}

impl Deref for SpdMatrix {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}

/// Lower-triangular matrix; as a Cholesky factor its diagonal is positive.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangular(Mat);

impl LowerTriangular {
    pub fn new(m: Mat) -> Result<Self> {
        check_square(&m)?;
        let n = m.nrows();
        for j in 1..n {
            for i in 0..j {
                if m[(i, j)] != 0.0 {
                    return Err(shape_err("lower-triangular matrix", format!("nonzero entry at ({i},{j})")));
                }
            }
        }
        Ok(Self(m))
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
}

impl Deref for LowerTriangular {
    type Target = Mat;
    fn deref(&self) -> &Mat {
        &self.0
    }
}
