//! Dense symmetric-matrix kernel: spectral functional calculus and its
//! differentials, Cholesky calculus, the symmetric Lyapunov solve and its
//! backward pass, and square roots of products of SPD matrices.
//!
//! Every spectral map goes through one real symmetric eigendecomposition,
//! returned as an [`EigenPair`] so callers can reuse it between forward and
//! backward passes.

mod cholesky;
mod lyapunov;
mod spectral;
mod types;

pub use cholesky::{chol, chol_diff, chol_inv_diff, half_lower, lower, strict_lower};
pub(crate) use cholesky::{chol_diff_mat, chol_inv_diff_mat, chol_mat};
pub use lyapunov::{lyap_solve, lyap_vjp, lyap_vjp_cached};
pub use spectral::{eig_sym, funcm, funcm_diff, funcm_spd, spd_project, EigenPair, MatFn, DEFAULT_SPD_FLOOR, GAP_TOL};
pub(crate) use spectral::eig_mat;
pub use types::{LowerTriangular, Mat, SpdMatrix, SymmetricMatrix, SPD_EPS, SYMMETRY_TOL};

use crate::error::{Error, Result};

pub fn frob_inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn frob_norm(a: &Mat) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn sym(a: &Mat) -> Mat {
    (a + a.transpose()) * 0.5
}

/// Square roots of `BA` and `AB` for SPD `A`, `B`:
/// `(BA)^{1/2} = B^{1/2} (B^{1/2} A B^{1/2})^{1/2} B^{-1/2}` and
/// `(AB)^{1/2} = [(BA)^{1/2}]ᵀ`.
pub fn prod_sqrt(b: &SpdMatrix, a: &SpdMatrix) -> Result<(Mat, Mat)> {
    if a.dim() != b.dim() {
        return Err(crate::error::shape_err(b.dim(), a.dim()));
    }
    let eb = eig_mat(b)?;
    eb.check_domain(MatFn::Sqrt)?;
    let ea = eig_mat(a)?;
    ea.check_domain(MatFn::Sqrt)?;
    prod_sqrt_cached(&eb, a)
}

pub(crate) fn prod_sqrt_cached(eb: &EigenPair, a: &Mat) -> Result<(Mat, Mat)> {
    let rb = eb.apply(MatFn::Sqrt);
    let rb_inv = eb.apply(MatFn::Pow(-0.5));
    let inner = eig_mat(&sym(&(&rb * a * &rb)))?;
    inner.check_domain(MatFn::Sqrt)?;
    let ba = &rb * inner.apply(MatFn::Sqrt) * rb_inv;
    let ab = ba.transpose();
    Ok((ba, ab))
}

/// Relative Frobenius distance `‖a - b‖ / max(‖b‖, floor)`.
pub fn rel_err(a: &Mat, b: &Mat) -> f64 {
    frob_norm(&(a - b)) / frob_norm(b).max(1e-300)
}

pub(crate) fn require_same_dim(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape { expected: a.to_string(), got: b.to_string() })
    }
}

#[cfg(test)]
mod tests;
