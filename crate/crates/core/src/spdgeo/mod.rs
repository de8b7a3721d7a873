//! Power-deformed metric families on S++(n).
//!
//! A deformed metric is the pullback of its base metric by `φ(P) = P^p`
//! (p = θ, or 2θ for BWM) scaled by `1/p²`. Tangent vectors returned here are
//! genuine vectors of `T_P S++(n)`: a deformed logarithm is
//! `(φ_{*,P})⁻¹ Log_{P^p}(Q^p)`, and a deformed transport conjugates the base
//! transport between `P^p` and `Q^p` the same way.

mod params;

pub use params::{Family, MetricParams};

use crate::error::{Error, Result};
use crate::symlin::{
    chol_diff_mat, chol_inv_diff_mat, chol_mat, eig_mat, frob_inner, frob_norm, prod_sqrt_cached, require_same_dim,
    strict_lower, sym, EigenPair, Mat, MatFn, SpdMatrix, SymmetricMatrix,
};

/// Tangent vector together with its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentAt {
    pub base: SpdMatrix,
    pub vec: SymmetricMatrix,
}

impl TangentAt {
    pub fn new(base: SpdMatrix, vec: SymmetricMatrix) -> Result<Self> {
        require_same_dim(base.dim(), vec.dim())?;
        Ok(Self { base, vec })
    }
}

/// O(n)-invariant Euclidean product on Sym(n): `α⟨V, W⟩ + β tr(V) tr(W)`.
pub fn oi_inner(v: &SymmetricMatrix, w: &SymmetricMatrix, alpha: f64, beta: f64) -> Result<f64> {
    require_same_dim(v.dim(), w.dim())?;
    params::check_alpha_beta(alpha, beta, v.dim())?;
    Ok(oi_inner_mat(v, w, alpha, beta))
}

pub(crate) fn oi_inner_mat(v: &Mat, w: &Mat, alpha: f64, beta: f64) -> f64 {
    alpha * frob_inner(v, w) + if beta != 0.0 { beta * v.trace() * w.trace() } else { 0.0 }
}

/// `αA + β tr(A) I`, the Riesz representer of `⟨·, A⟩^{(α,β)}`.
pub(crate) fn oi_apply(a: &Mat, alpha: f64, beta: f64) -> Mat {
    let mut out = a * alpha;
    if beta != 0.0 {
        let t = beta * a.trace();
        for i in 0..a.nrows() {
            out[(i, i)] += t;
        }
    }
    out
}

fn is_identity(p: &Mat) -> bool {
    let n = p.nrows();
    frob_norm(&(p - Mat::identity(n, n))) <= 1e-12 * (n as f64).sqrt()
}

/// Base point pushed through the deforming power map, with the spectral data
/// needed for its differential.
struct Deformed {
    power: f64,
    eig: Option<EigenPair>,
    image: Mat,
}

impl Deformed {
    fn new(power: f64, p: &Mat) -> Result<Self> {
        if power == 1.0 {
            return Ok(Self { power, eig: None, image: p.clone() });
        }
        let eig = eig_mat(p)?;
        eig.check_domain(MatFn::Pow(power))?;
        let image = eig.apply(MatFn::Pow(power));
        Ok(Self { power, eig: Some(eig), image })
    }

    fn push(&self, v: &Mat) -> Mat {
        match &self.eig {
            None => v.clone(),
            Some(e) => e.diff(MatFn::Pow(self.power), v),
        }
    }

    fn pull(&self, v: &Mat) -> Mat {
        match &self.eig {
            None => v.clone(),
            Some(e) => e.diff_inv(MatFn::Pow(self.power), v),
        }
    }
}

fn base_metric(mp: &MetricParams, x: &Mat, v: &Mat, w: &Mat) -> Result<f64> {
    let (a, b) = (mp.alpha(), mp.beta());
    Ok(match mp.family() {
        Family::Lem => {
            let e = eig_mat(x)?;
            e.check_domain(MatFn::Log)?;
            oi_inner_mat(&e.diff(MatFn::Log, v), &e.diff(MatFn::Log, w), a, b)
        }
        Family::Aim => {
            let e = eig_mat(x)?;
            let xinv = e.map_spectrum(|s| 1.0 / s);
            let xv = &xinv * v;
            let xw = &xinv * w;
            a * frob_inner(&xv, &xw.transpose()) + b * xv.trace() * xw.trace()
        }
        Family::Em => oi_inner_mat(v, w, a, b),
        Family::Lcm => {
            let l = chol_mat(x)?;
            let vt = chol_diff_mat(&l, v);
            let wt = chol_diff_mat(&l, w);
            let n = x.nrows();
            let mut acc = 0.0;
            for j in 0..n {
                for i in (j + 1)..n {
                    acc += vt[(i, j)] * wt[(i, j)];
                }
                acc += vt[(j, j)] * wt[(j, j)] / (l[(j, j)] * l[(j, j)]);
            }
            acc
        }
        Family::Bwm => {
            let e = eig_mat(x)?;
            0.5 * frob_inner(&e.lyap(v), w)
        }
    })
}

/// Riemannian metric `g_P(V, W)` of the deformed family.
pub fn metric(mp: &MetricParams, p: &SpdMatrix, v: &SymmetricMatrix, w: &SymmetricMatrix) -> Result<f64> {
    require_same_dim(p.dim(), v.dim())?;
    require_same_dim(p.dim(), w.dim())?;
    mp.validate_dim(p.dim())?;
    metric_mat(mp, p, v, w)
}

pub(crate) fn metric_mat(mp: &MetricParams, p: &Mat, v: &Mat, w: &Mat) -> Result<f64> {
    let d = Deformed::new(mp.power(), p)?;
    let g = base_metric(mp, &d.image, &d.push(v), &d.push(w))?;
    Ok(g / (d.power * d.power))
}

fn base_log(family: Family, x: &Mat, y: &Mat) -> Result<Mat> {
    Ok(match family {
        Family::Lem => {
            let ex = eig_mat(x)?;
            ex.check_domain(MatFn::Log)?;
            let ey = eig_mat(y)?;
            ey.check_domain(MatFn::Log)?;
            ex.diff_inv(MatFn::Log, &(ey.apply(MatFn::Log) - ex.apply(MatFn::Log)))
        }
        Family::Aim => {
            let ex = eig_mat(x)?;
            ex.check_domain(MatFn::Sqrt)?;
            let r = ex.apply(MatFn::Sqrt);
            let ri = ex.apply(MatFn::Pow(-0.5));
            let inner = eig_mat(&sym(&(&ri * y * &ri)))?;
            inner.check_domain(MatFn::Log)?;
            sym(&(&r * inner.apply(MatFn::Log) * &r))
        }
        Family::Em => y - x,
        Family::Lcm => {
            let l = chol_mat(x)?;
            let k = chol_mat(y)?;
            let n = x.nrows();
            let mut t = strict_lower(&k) - strict_lower(&l);
            for j in 0..n {
                t[(j, j)] = l[(j, j)] * (k[(j, j)] / l[(j, j)]).ln();
            }
            chol_inv_diff_mat(&l, &t)
        }
        Family::Bwm => {
            let ex = eig_mat(x)?;
            ex.check_domain(MatFn::Sqrt)?;
            let (xy, yx) = prod_sqrt_cached(&ex, y)?;
            xy + yx - x * 2.0
        }
    })
}

/// Riemannian logarithm `Log_P Q` of the deformed family. Defined on all of
/// S++(n) × S++(n), including for the incomplete EM and BWM families.
pub fn rielog(mp: &MetricParams, p: &SpdMatrix, q: &SpdMatrix) -> Result<SymmetricMatrix> {
    require_same_dim(p.dim(), q.dim())?;
    rielog_mat(mp, p, q).map(SymmetricMatrix::from_mat_unchecked)
}

pub(crate) fn rielog_mat(mp: &MetricParams, p: &Mat, q: &Mat) -> Result<Mat> {
    let d = Deformed::new(mp.power(), p)?;
    let qi = if d.power == 1.0 { q.clone() } else { pow_mat(q, d.power)? };
    Ok(sym(&d.pull(&base_log(mp.family(), &d.image, &qi)?)))
}

fn pow_mat(q: &Mat, power: f64) -> Result<Mat> {
    let e = eig_mat(q)?;
    e.check_domain(MatFn::Pow(power))?;
    Ok(e.apply(MatFn::Pow(power)))
}

/// Affine-invariant exponential `P^{1/2} exp(P^{-1/2} V P^{-1/2}) P^{1/2}`.
pub fn riexp_aim(p: &SpdMatrix, v: &SymmetricMatrix) -> Result<SpdMatrix> {
    require_same_dim(p.dim(), v.dim())?;
    riexp_aim_mat(p, v).map(SpdMatrix::from_mat_unchecked)
}

pub(crate) fn riexp_aim_mat(p: &Mat, v: &Mat) -> Result<Mat> {
    let e = eig_mat(p)?;
    e.check_domain(MatFn::Sqrt)?;
    let r = e.apply(MatFn::Sqrt);
    let ri = e.apply(MatFn::Pow(-0.5));
    let inner = eig_mat(&sym(&(&ri * v * &ri)))?;
    Ok(sym(&(&r * inner.apply(MatFn::Exp) * &r)))
}

fn base_transport(family: Family, x: &Mat, y: &Mat, v: &Mat) -> Result<Mat> {
    Ok(match family {
        Family::Lem => {
            let ex = eig_mat(x)?;
            let ey = eig_mat(y)?;
            ey.check_domain(MatFn::Log)?;
            ey.diff_inv(MatFn::Log, &ex.diff(MatFn::Log, v))
        }
        Family::Aim => {
            // (Y X⁻¹)^{1/2} V (X⁻¹ Y)^{1/2}
            let ex = eig_mat(x)?;
            let xinv = ex.map_spectrum(|s| 1.0 / s);
            let ey = eig_mat(y)?;
            ey.check_domain(MatFn::Sqrt)?;
            let (yx, xy) = prod_sqrt_cached(&ey, &xinv)?;
            sym(&(yx * v * xy))
        }
        Family::Em => v.clone(),
        Family::Lcm => {
            let l = chol_mat(x)?;
            let k = chol_mat(y)?;
            let vt = chol_diff_mat(&l, v);
            let mut t = strict_lower(&vt);
            for j in 0..x.nrows() {
                t[(j, j)] = k[(j, j)] / l[(j, j)] * vt[(j, j)];
            }
            chol_inv_diff_mat(&k, &t)
        }
        Family::Bwm => {
            debug_assert!(is_identity(x));
            let ey = eig_mat(y)?;
            ey.hadamard_conj(v, |i, j| (0.5 * (ey.sigma[i] + ey.sigma[j])).sqrt())
        }
    })
}

/// Parallel transport `Γ_{P→Q}(V)` along the geodesic. BWM transport is only
/// available from the identity (or trivially from `P` to itself).
pub fn ptransport(mp: &MetricParams, p: &SpdMatrix, q: &SpdMatrix, v: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    require_same_dim(p.dim(), q.dim())?;
    require_same_dim(p.dim(), v.dim())?;
    ptransport_mat(mp, p, q, v).map(SymmetricMatrix::from_mat_unchecked)
}

pub(crate) fn ptransport_mat(mp: &MetricParams, p: &Mat, q: &Mat, v: &Mat) -> Result<Mat> {
    if p == q {
        return Ok(v.clone());
    }
    if mp.family() == Family::Bwm && !is_identity(p) {
        return Err(Error::UnsupportedOrigin { family: "BWM" });
    }
    let dp = Deformed::new(mp.power(), p)?;
    let dq = Deformed::new(mp.power(), q)?;
    let moved = base_transport(mp.family(), &dp.image, &dq.image, &dp.push(v))?;
    Ok(sym(&dq.pull(&moved)))
}

/// Cholesky group product `S1 ⊙ S2 = L1 S2 L1ᵀ`, `L1 = chol(S1)`.
pub fn chol_group_op(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<SpdMatrix> {
    require_same_dim(s1.dim(), s2.dim())?;
    let l = chol_mat(s1)?;
    Ok(SpdMatrix::from_mat_unchecked(sym(&(&l * &**s2 * l.transpose()))))
}

/// Squared norm `g_P(V, V)`.
pub fn norm_sq(mp: &MetricParams, p: &SpdMatrix, v: &SymmetricMatrix) -> Result<f64> {
    metric(mp, p, v, v)
}
