use super::spectral::{eig_mat, EigenPair};
use super::types::{Mat, SpdMatrix, SymmetricMatrix};
use crate::error::{shape_err, Result};

/// Solves `X P + P X = V` through the eigendecomposition of `P`.
pub fn lyap_solve(p: &SpdMatrix, v: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if p.dim() != v.dim() {
        return Err(shape_err(p.dim(), v.dim()));
    }
    let eig = eig_mat(p)?;
    Ok(SymmetricMatrix::from_mat_unchecked(eig.lyap(v)))
}

/// Backward pass of `X = L_P[V]` given `G = ∂loss/∂X`:
/// `dV = L_P[G]`, `dP = -X dV - dV X`. No eigenvector derivatives are involved.
pub fn lyap_vjp(p: &SpdMatrix, x: &SymmetricMatrix, g: &SymmetricMatrix) -> Result<(SymmetricMatrix, SymmetricMatrix)> {
    if p.dim() != x.dim() || p.dim() != g.dim() {
        return Err(shape_err(p.dim(), format!("{} / {}", x.dim(), g.dim())));
    }
    let eig = eig_mat(p)?;
    let (dv, dp) = lyap_vjp_cached(&eig, x, g);
    Ok((SymmetricMatrix::from_mat_unchecked(dv), SymmetricMatrix::from_mat_unchecked(dp)))
}

/// [`lyap_vjp`] reusing the forward decomposition of `P`.
pub fn lyap_vjp_cached(eig: &EigenPair, x: &Mat, g: &Mat) -> (Mat, Mat) {
    let dv = eig.lyap(g);
    let xdv = x * &dv;
    let dp = -(&xdv + xdv.transpose());
    (dv, dp)
}
