use nalgebra::{DVector, SymmetricEigen};

use super::types::{Mat, SpdMatrix, SymmetricMatrix};
use super::{frob_norm, sym};
use crate::error::{Error, Result};

/// Relative eigenvalue gap below which divided differences fall back to the
/// derivative at the midpoint.
pub const GAP_TOL: f64 = 1e-10;

const EIG_RESIDUAL_TOL: f64 = 1e-10;

/// Spectral decomposition `S = U diag(sigma) Uᵀ`, eigenvalues descending.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub u: Mat,
    pub sigma: DVector<f64>,
}

/// Scalar function applied through the spectrum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatFn {
    Log,
    Exp,
    Pow(f64),
    Sqrt,
}

impl MatFn {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            MatFn::Log => x.ln(),
            MatFn::Exp => x.exp(),
            MatFn::Pow(p) => {
                if p.fract() == 0.0 && p.abs() < i32::MAX as f64 {
                    x.powi(p as i32)
                } else {
                    x.powf(p)
                }
            }
            MatFn::Sqrt => x.sqrt(),
        }
    }

    pub fn deriv(self, x: f64) -> f64 {
        match self {
            MatFn::Log => 1.0 / x,
            MatFn::Exp => x.exp(),
            MatFn::Pow(p) => {
                if p == 1.0 {
                    1.0
                } else {
                    p * MatFn::Pow(p - 1.0).eval(x)
                }
            }
            MatFn::Sqrt => 0.5 / x.sqrt(),
        }
    }

    /// First divided difference `f[a, b]`. Evaluated in cancellation-free
    /// form; within `gap` of each other the midpoint derivative is used.
    pub fn divided(self, a: f64, b: f64, gap: f64) -> f64 {
        let d = a - b;
        if d.abs() <= gap {
            return self.deriv(0.5 * (a + b));
        }
        match self {
            MatFn::Log => (d / b).ln_1p() / d,
            MatFn::Exp => b.exp() * d.exp_m1() / d,
            MatFn::Pow(p) if p == 1.0 => 1.0,
            MatFn::Pow(p) => self.eval(b) * (p * (d / b).ln_1p()).exp_m1() / d,
            MatFn::Sqrt => 1.0 / (a.sqrt() + b.sqrt()),
        }
    }

    /// Whether the function needs a strictly positive spectrum.
    pub fn needs_positive(self) -> bool {
        match self {
            MatFn::Log | MatFn::Sqrt => true,
            MatFn::Exp => false,
            MatFn::Pow(p) => p.fract() != 0.0 || p < 0.0,
        }
    }

    fn name(self) -> &'static str {
        match self {
            MatFn::Log => "log",
            MatFn::Exp => "exp",
            MatFn::Pow(_) => "pow",
            MatFn::Sqrt => "sqrt",
        }
    }
}

/// Symmetric eigendecomposition, eigenvalues sorted descending (stable on ties).
pub fn eig_sym(s: &SymmetricMatrix) -> Result<EigenPair> {
    eig_mat(s.as_mat())
}

pub(crate) fn eig_mat(m: &Mat) -> Result<EigenPair> {
    let n = m.nrows();
    let dec = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 100 * n.max(10))
        .ok_or(Error::EigenNotConverged { residual: f64::INFINITY })?;
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the original order on exact ties
    order.sort_by(|&a, &b| dec.eigenvalues[b].total_cmp(&dec.eigenvalues[a]));
    let sigma = DVector::from_iterator(n, order.iter().map(|&i| dec.eigenvalues[i]));
    let u = Mat::from_fn(n, n, |r, c| dec.eigenvectors[(r, order[c])]);
    let pair = EigenPair { u, sigma };
    let scale = frob_norm(m).max(f64::MIN_POSITIVE);
    let residual = frob_norm(&(pair.reconstruct() - m)) / scale;
    if !(residual <= EIG_RESIDUAL_TOL) {
        return Err(Error::EigenNotConverged { residual });
    }
    Ok(pair)
}

impl EigenPair {
    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Mat {
        self.map_spectrum(|x| x)
    }

    /// `U diag(g(σ)) Uᵀ`, symmetrized.
    pub fn map_spectrum(&self, g: impl Fn(f64) -> f64) -> Mat {
        let n = self.dim();
        let mut scaled = self.u.clone();
        for j in 0..n {
            let w = g(self.sigma[j]);
            scaled.column_mut(j).scale_mut(w);
        }
        sym(&(scaled * self.u.transpose()))
    }

    /// `U [w(i, j) ∘ (Uᵀ V U)] Uᵀ`. Every spectral linear map used here
    /// (differentials, their inverses, the Lyapunov operator, the
    /// Bures-Wasserstein transport from I) is an instance.
    pub fn hadamard_conj(&self, v: &Mat, w: impl Fn(usize, usize) -> f64) -> Mat {
        let n = self.dim();
        let mut inner = self.u.transpose() * v * &self.u;
        for j in 0..n {
            for i in 0..n {
                inner[(i, j)] *= w(i, j);
            }
        }
        sym(&(&self.u * inner * self.u.transpose()))
    }

    fn gap(&self) -> f64 {
        GAP_TOL * self.sigma.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Divided-difference matrix `f[σ_i, σ_j]`.
    pub fn divided_differences(&self, f: MatFn) -> Mat {
        let n = self.dim();
        let gap = self.gap();
        Mat::from_fn(n, n, |i, j| {
            if i == j {
                f.deriv(self.sigma[i])
            } else {
                f.divided(self.sigma[i], self.sigma[j], gap)
            }
        })
    }

    pub fn check_domain(&self, f: MatFn) -> Result<()> {
        if f.needs_positive() {
            let n = self.dim();
            let min = self.sigma[n - 1];
            if !(min > 0.0) {
                return Err(Error::NotPositiveDefinite { op: f.name(), index: n - 1, eigenvalue: min });
            }
        }
        Ok(())
    }

    pub fn apply(&self, f: MatFn) -> Mat {
        self.map_spectrum(|x| f.eval(x))
    }

    /// Daleckii-Krein differential `f_{*,S}(V)`; self-adjoint, so it is also the VJP.
    pub fn diff(&self, f: MatFn, v: &Mat) -> Mat {
        let k = self.divided_differences(f);
        self.hadamard_conj(v, |i, j| k[(i, j)])
    }

    /// Inverse of [`EigenPair::diff`]; requires a strictly monotone `f`.
    pub fn diff_inv(&self, f: MatFn, v: &Mat) -> Mat {
        let k = self.divided_differences(f);
        self.hadamard_conj(v, |i, j| 1.0 / k[(i, j)])
    }

    /// Solves `X S + S X = V` for this spectrum.
    pub fn lyap(&self, v: &Mat) -> Mat {
        self.hadamard_conj(v, |i, j| 1.0 / (self.sigma[i] + self.sigma[j]))
    }
}

/// `U f(Σ) Uᵀ`.
pub fn funcm(s: &SymmetricMatrix, f: MatFn) -> Result<SymmetricMatrix> {
    let eig = eig_sym(s)?;
    eig.check_domain(f)?;
    Ok(SymmetricMatrix::from_mat_unchecked(eig.apply(f)))
}

/// Spectral function of an SPD input; the result stays SPD for the
/// functions used here (positive on the positive axis).
pub fn funcm_spd(s: &SpdMatrix, f: MatFn) -> Result<SpdMatrix> {
    debug_assert!(f != MatFn::Log);
    let eig = eig_mat(s)?;
    eig.check_domain(f)?;
    Ok(SpdMatrix::from_mat_unchecked(eig.apply(f)))
}

/// Differential of the spectral function at `S` applied to `V`.
pub fn funcm_diff(s: &SpdMatrix, f: MatFn, v: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    if s.dim() != v.dim() {
        return Err(crate::error::shape_err(s.dim(), v.dim()));
    }
    let eig = eig_mat(s)?;
    eig.check_domain(f)?;
    Ok(SymmetricMatrix::from_mat_unchecked(eig.diff(f, v)))
}

/// Symmetrize, then clamp the spectrum from below at `floor`.
pub fn spd_project(s: &Mat, floor: f64) -> Result<SpdMatrix> {
    let sy = sym(s);
    let eig = eig_mat(&sy)?;
    Ok(SpdMatrix::from_mat_unchecked(eig.map_spectrum(|x| x.max(floor))))
}

/// Default eigenvalue floor of [`spd_project`].
pub const DEFAULT_SPD_FLOOR: f64 = 1e-8;
