use super::types::{LowerTriangular, Mat, SpdMatrix, SymmetricMatrix};
use crate::error::{shape_err, Error, Result};

/// Cholesky factor `L` with `L Lᵀ = P` and positive diagonal.
pub fn chol(p: &SpdMatrix) -> Result<LowerTriangular> {
    chol_mat(p).map(LowerTriangular::from_mat_unchecked)
}

pub(crate) fn chol_mat(p: &Mat) -> Result<Mat> {
    let n = p.nrows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = p[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::CholeskyPivot { index: j, value: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = p[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Strictly-lower part plus half the diagonal.
pub fn half_lower(x: &Mat) -> Mat {
    let n = x.nrows();
    Mat::from_fn(n, n, |i, j| {
        if i > j {
            x[(i, j)]
        } else if i == j {
            0.5 * x[(i, i)]
        } else {
            0.0
        }
    })
}

/// Strictly-lower part.
pub fn strict_lower(x: &Mat) -> Mat {
    let n = x.nrows();
    Mat::from_fn(n, n, |i, j| if i > j { x[(i, j)] } else { 0.0 })
}

/// Lower part including the diagonal.
pub fn lower(x: &Mat) -> Mat {
    let n = x.nrows();
    Mat::from_fn(n, n, |i, j| if i >= j { x[(i, j)] } else { 0.0 })
}

/// `L⁻¹ X L⁻ᵀ` via two triangular solves.
pub(crate) fn congruence_inv(l: &Mat, x: &Mat) -> Mat {
    let y = l.solve_lower_triangular(x).expect("cholesky factor has a positive diagonal");
    l.solve_lower_triangular(&y.transpose()).expect("cholesky factor has a positive diagonal")
}

pub(crate) fn chol_diff_mat(l: &Mat, v: &Mat) -> Mat {
    l * half_lower(&congruence_inv(l, v))
}

/// Differential of the Cholesky map at `P`: `L · half(L⁻¹ V L⁻ᵀ)`.
pub fn chol_diff(p: &SpdMatrix, v: &SymmetricMatrix) -> Result<LowerTriangular> {
    if p.dim() != v.dim() {
        return Err(shape_err(p.dim(), v.dim()));
    }
    let l = chol_mat(p)?;
    Ok(LowerTriangular::from_mat_unchecked(chol_diff_mat(&l, v)))
}

pub(crate) fn chol_inv_diff_mat(l: &Mat, x: &Mat) -> Mat {
    let a = x * l.transpose();
    &a + a.transpose()
}

/// Differential of `L ↦ L Lᵀ` at `L`: `X Lᵀ + L Xᵀ`.
pub fn chol_inv_diff(l: &LowerTriangular, x: &LowerTriangular) -> Result<SymmetricMatrix> {
    if l.dim() != x.dim() {
        return Err(shape_err(l.dim(), x.dim()));
    }
    Ok(SymmetricMatrix::from_mat_unchecked(chol_inv_diff_mat(l, x)))
}
