//! Reverse-mode gradients of the classifier heads.
//!
//! A forward pass records a tape holding every decomposition the backward
//! pass needs; the backward pass only multiplies cached factors, so it is
//! exactly repeatable. Gradients with respect to manifold parameters are
//! ambient Euclidean gradients (symmetric for SPD points, projected to the
//! Lie algebra for rotations); converting them to Riemannian gradients is the
//! optimizer's job.

mod check;

pub use check::{
    check_vjp_case, fd_check, gradcheck_lie, gradcheck_logeig, gradcheck_spd, primitive_cases, skew_basis, sym_basis,
    FdReport, InputKind, VjpCase,
};
pub use crate::symlin::lyap_vjp as vjp_lyap;

use crate::error::{Error, Result};
use crate::rmlr::{
    lcm_pair, log_cholesky_coords, pow_eig, softmax_xent, sym_vec, sym_vec_adjoint, LieMlrLayer, Logits, LogEigLayer,
    SpdMlrLayer,
};
use crate::songeo::{so_log, so_project, RotationMatrix, SkewMatrix, SMALL_ANGLE};
use crate::spdgeo::{oi_apply, Family, MetricParams};
use crate::symlin::{
    chol_mat, eig_mat, frob_inner, lower, lyap_vjp_cached, prod_sqrt_cached, require_same_dim, strict_lower, sym,
    EigenPair, LowerTriangular, Mat, MatFn, SpdMatrix, SymmetricMatrix,
};

/// Adjoint of `S ↦ f(S)` for symmetric `S`: `U [f[σ_i, σ_j] ∘ Uᵀ sym(G) U] Uᵀ`.
pub fn vjp_funcm(s: &SymmetricMatrix, f: MatFn, g: &Mat) -> Result<SymmetricMatrix> {
    require_same_dim(s.dim(), g.nrows())?;
    let e = eig_mat(s)?;
    e.check_domain(f)?;
    Ok(SymmetricMatrix::from_mat_unchecked(e.diff(f, &sym(g))))
}

fn vjp_pow(e: &EigenPair, power: f64, g: &Mat) -> Mat {
    if power == 1.0 {
        sym(g)
    } else {
        e.diff(MatFn::Pow(power), &sym(g))
    }
}

/// Adjoint of the Cholesky map `P ↦ L` given `G_L = ∂loss/∂L` (only its
/// lower triangle matters): `sym(L⁻ᵀ Φ(Lᵀ G_L) L⁻¹)` with `Φ` keeping the
/// strictly-lower part and half the diagonal.
pub fn vjp_chol(l: &LowerTriangular, g_l: &Mat) -> Result<SymmetricMatrix> {
    require_same_dim(l.dim(), g_l.nrows())?;
    Ok(SymmetricMatrix::from_mat_unchecked(vjp_chol_mat(l, g_l)))
}

pub(crate) fn vjp_chol_mat(l: &Mat, g_l: &Mat) -> Mat {
    let phi = crate::symlin::half_lower(&(l.transpose() * lower(g_l)));
    // L⁻ᵀ Φ L⁻¹ through two triangular solves
    let y = l.tr_solve_lower_triangular(&phi).expect("cholesky factor has a positive diagonal");
    let z = l.tr_solve_lower_triangular(&y.transpose()).expect("cholesky factor has a positive diagonal");
    sym(&z.transpose())
}

/// Adjoint of `(B, A) ↦ (BA)^{1/2}` through its factorization
/// `R (R A R)^{1/2} R⁻¹`, `R = B^{1/2}`. Returns `(∂/∂B, ∂/∂A)`.
pub fn vjp_prod_sqrt(b: &SpdMatrix, a: &SpdMatrix, g: &Mat) -> Result<(SymmetricMatrix, SymmetricMatrix)> {
    require_same_dim(b.dim(), a.dim())?;
    let eb = eig_mat(b)?;
    eb.check_domain(MatFn::Sqrt)?;
    let (gb, ga) = prod_sqrt_backward(&eb, a, g)?;
    Ok((SymmetricMatrix::from_mat_unchecked(gb), SymmetricMatrix::from_mat_unchecked(ga)))
}

pub(crate) fn prod_sqrt_backward(eb: &EigenPair, a: &Mat, g: &Mat) -> Result<(Mat, Mat)> {
    let r = eb.apply(MatFn::Sqrt);
    let ri = eb.apply(MatFn::Pow(-0.5));
    let ey = eig_mat(&sym(&(&r * a * &r)))?;
    ey.check_domain(MatFn::Sqrt)?;
    let c = ey.apply(MatFn::Sqrt);
    // F = R C R⁻¹
    let g_c = &r * g * &ri;
    let g_y = ey.diff(MatFn::Sqrt, &sym(&g_c));
    let g_r = g * &ri * &c + &g_y * &r * a + a * &r * &g_y;
    let g_ri = &c * &r * g;
    let g_a = sym(&(&r * &g_y * &r));
    let g_b = eb.diff(MatFn::Sqrt, &sym(&g_r)) + eb.diff(MatFn::Pow(-0.5), &sym(&g_ri));
    Ok((g_b, g_a))
}

/// Gradients of the loss of one SPD sample.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdGrad {
    pub ds: SymmetricMatrix,
    pub dp: Vec<SymmetricMatrix>,
    pub da: Vec<SymmetricMatrix>,
}

/// Gradients of the loss of one sample on `SO(n)^m`. `ds` and `dp` are
/// projected to the Lie algebra at the respective point.
#[derive(Clone, Debug, PartialEq)]
pub struct LieGrad {
    pub ds: Vec<SkewMatrix>,
    pub dp: Vec<Vec<SkewMatrix>>,
    pub da: Vec<Vec<SkewMatrix>>,
}

/// Gradients of the loss of one sample for the LogEig head.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEigGrad {
    pub ds: SymmetricMatrix,
    pub dw: Mat,
    pub db: Vec<f64>,
}

/// Gradient of the loss with respect to the feature and every parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum GradBundle {
    Spd(SpdGrad),
    Lie(LieGrad),
    LogEig(LogEigGrad),
}

impl GradBundle {
    fn param_mats(&self) -> Vec<&Mat> {
        match self {
            GradBundle::Spd(g) => g.dp.iter().map(|m| m.as_mat()).chain(g.da.iter().map(|m| m.as_mat())).collect(),
            GradBundle::Lie(g) => {
                g.dp.iter().flatten().map(|m| m.as_mat()).chain(g.da.iter().flatten().map(|m| m.as_mat())).collect()
            }
            GradBundle::LogEig(g) => vec![&g.dw],
        }
    }

    /// Joint Frobenius norm over the parameter gradients (the feature
    /// gradient is excluded).
    pub fn param_norm(&self) -> f64 {
        let mut acc: f64 = self.param_mats().iter().map(|m| frob_inner(m, m)).sum();
        if let GradBundle::LogEig(g) = self {
            acc += g.db.iter().map(|x| x * x).sum::<f64>();
        }
        acc.sqrt()
    }

    /// Multiplies every parameter gradient by `a`.
    pub fn scale_params(&mut self, a: f64) {
        match self {
            GradBundle::Spd(g) => {
                for m in g.dp.iter_mut().chain(g.da.iter_mut()) {
                    *m = m.scale(a);
                }
            }
            GradBundle::Lie(g) => {
                for m in g.dp.iter_mut().flatten().chain(g.da.iter_mut().flatten()) {
                    *m = m.scale(a);
                }
            }
            GradBundle::LogEig(g) => {
                g.dw *= a;
                g.db.iter_mut().for_each(|x| *x *= a);
            }
        }
    }

    /// Adds `other` scaled by `a` (same head and shapes).
    pub fn axpy(&mut self, a: f64, other: &GradBundle) -> Result<()> {
        let shape = || Error::Shape { expected: "gradients of the same head".into(), got: "mismatch".into() };
        match (self, other) {
            (GradBundle::Spd(g), GradBundle::Spd(o)) => {
                if g.dp.len() != o.dp.len() {
                    return Err(shape());
                }
                g.ds = SymmetricMatrix::from_mat_unchecked(&*g.ds + &*o.ds * a);
                for (x, y) in g.dp.iter_mut().zip(&o.dp).chain(g.da.iter_mut().zip(&o.da)) {
                    *x = SymmetricMatrix::from_mat_unchecked(&**x + &**y * a);
                }
            }
            (GradBundle::Lie(g), GradBundle::Lie(o)) => {
                if g.dp.len() != o.dp.len() || g.ds.len() != o.ds.len() {
                    return Err(shape());
                }
                for (x, y) in g.ds.iter_mut().zip(&o.ds) {
                    *x = SkewMatrix::from_mat_unchecked(&**x + &**y * a);
                }
                for (x, y) in g.dp.iter_mut().flatten().zip(o.dp.iter().flatten()) {
                    *x = SkewMatrix::from_mat_unchecked(&**x + &**y * a);
                }
                for (x, y) in g.da.iter_mut().flatten().zip(o.da.iter().flatten()) {
                    *x = SkewMatrix::from_mat_unchecked(&**x + &**y * a);
                }
            }
            (GradBundle::LogEig(g), GradBundle::LogEig(o)) => {
                if g.db.len() != o.db.len() {
                    return Err(shape());
                }
                g.ds = SymmetricMatrix::from_mat_unchecked(&*g.ds + &*o.ds * a);
                g.dw += &o.dw * a;
                g.db.iter_mut().zip(&o.db).for_each(|(x, y)| *x += a * y);
            }
            _ => return Err(shape()),
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        let feature_ok = match self {
            GradBundle::Spd(g) => g.ds.iter().all(|x| x.is_finite()),
            GradBundle::Lie(g) => g.ds.iter().all(|m| m.iter().all(|x| x.is_finite())),
            GradBundle::LogEig(g) => g.ds.iter().all(|x| x.is_finite()) && g.db.iter().all(|x| x.is_finite()),
        };
        feature_ok && self.param_mats().iter().all(|m| m.iter().all(|x| x.is_finite()))
    }
}

enum FeatureCache {
    Lem { log_s: Mat },
    Pow { s_pow: Mat },
    Lcm { k: Mat, z: Mat },
    Bwm { s_pow: Mat },
}

enum ClassCache {
    Lem { e: EigenPair, log_p: Mat },
    Em { e: EigenPair, p_pow: Mat },
    Aim { e: EigenPair, b: Mat, ey: EigenPair, log_y: Mat },
    Lcm { e: EigenPair, l: Mat, z: Mat },
    Bwm { e: EigenPair, ew: EigenPair, l: Mat, x: Mat, m: Mat },
}

/// Forward record of an SPD head on one sample.
pub struct SpdTape {
    mp: MetricParams,
    s_eig: EigenPair,
    feature: FeatureCache,
    a: Vec<Mat>,
    classes: Vec<ClassCache>,
    logits: Logits,
}

/// Forward record of the Lie head on one sample.
pub struct LieTape {
    s: Vec<RotationMatrix>,
    p: Vec<Vec<RotationMatrix>>,
    a: Vec<Vec<Mat>>,
    logs: Vec<Vec<Mat>>,
    logits: Logits,
}

/// Forward record of the LogEig head on one sample.
pub struct LogEigTape {
    s_eig: EigenPair,
    v: Vec<f64>,
    weight: Mat,
    logits: Logits,
}

/// Forward record of any head; `backward` may be called any number of times
/// and always returns the same bits.
pub enum Tape {
    Spd(SpdTape),
    Lie(LieTape),
    LogEig(LogEigTape),
}

impl SpdTape {
    pub fn record(s: &SpdMatrix, layer: &SpdMlrLayer) -> Result<Self> {
        require_same_dim(layer.dim(), s.dim())?;
        let mp = *layer.metric();
        let theta = mp.theta();
        let s_eig = eig_mat(s)?;
        let feature = match mp.family() {
            Family::Lem => {
                s_eig.check_domain(MatFn::Log)?;
                FeatureCache::Lem { log_s: s_eig.apply(MatFn::Log) }
            }
            Family::Aim | Family::Em => FeatureCache::Pow { s_pow: pow_eig(&s_eig, s, theta)? },
            Family::Lcm => {
                let s_pow = pow_eig(&s_eig, s, theta)?;
                FeatureCache::Lcm { k: chol_mat(&s_pow)?, z: log_cholesky_coords(&s_pow)? }
            }
            Family::Bwm => FeatureCache::Bwm { s_pow: pow_eig(&s_eig, s, mp.power())? },
        };
        let (alpha, beta) = (mp.alpha(), mp.beta());
        let mut classes = Vec::with_capacity(layer.classes());
        let mut scores = Vec::with_capacity(layer.classes());
        for (p, a) in layer.points().iter().zip(layer.tangents()) {
            let e = eig_mat(p)?;
            let (cache, score) = match &feature {
                FeatureCache::Lem { log_s } => {
                    e.check_domain(MatFn::Log)?;
                    let log_p = e.apply(MatFn::Log);
                    let score = frob_inner(&(log_s - &log_p), &oi_apply(a, alpha, beta));
                    (ClassCache::Lem { e, log_p }, score)
                }
                FeatureCache::Pow { s_pow } if mp.family() == Family::Em => {
                    let p_pow = pow_eig(&e, p, theta)?;
                    let score = frob_inner(&(s_pow - &p_pow), &oi_apply(a, alpha, beta)) / theta;
                    (ClassCache::Em { e, p_pow }, score)
                }
                FeatureCache::Pow { s_pow } => {
                    e.check_domain(MatFn::Pow(-0.5 * theta))?;
                    let b = e.apply(MatFn::Pow(-0.5 * theta));
                    let ey = eig_mat(&sym(&(&b * s_pow * &b)))?;
                    ey.check_domain(MatFn::Log)?;
                    let log_y = ey.apply(MatFn::Log);
                    let score = frob_inner(&log_y, &oi_apply(a, alpha, beta)) / theta;
                    (ClassCache::Aim { e, b, ey, log_y }, score)
                }
                FeatureCache::Lcm { z: zs, .. } => {
                    let p_pow = pow_eig(&e, p, theta)?;
                    let l = chol_mat(&p_pow)?;
                    let z = log_cholesky_coords(&p_pow)?;
                    let score = lcm_pair(&(zs - &z), a) / theta;
                    (ClassCache::Lcm { e, l, z }, score)
                }
                FeatureCache::Bwm { s_pow } => {
                    let pw = pow_eig(&e, p, mp.power())?;
                    let ew = if mp.power() == 1.0 { e.clone() } else { eig_mat(&pw)? };
                    ew.check_domain(MatFn::Sqrt)?;
                    let (ps, sp) = prod_sqrt_cached(&ew, s_pow)?;
                    let m = ps + sp - &pw * 2.0;
                    let l = chol_mat(&pw)?;
                    let x = ew.lyap(&(&l * &**a * l.transpose()));
                    let score = frob_inner(&m, &x) / (4.0 * theta);
                    (ClassCache::Bwm { e, ew, l, x, m }, score)
                }
            };
            classes.push(cache);
            scores.push(score);
        }
        Ok(Self {
            mp,
            s_eig,
            feature,
            a: layer.tangents().iter().map(|a| a.as_mat().clone()).collect(),
            classes,
            logits: Logits::new(scores)?,
        })
    }

    pub fn logits(&self) -> &Logits {
        &self.logits
    }

    /// Pulls `∂loss/∂logits` back to the feature and every parameter.
    pub fn backward(&self, dlogits: &[f64]) -> Result<SpdGrad> {
        require_same_dim(self.classes.len(), dlogits.len())?;
        let mp = &self.mp;
        let (alpha, beta, theta) = (mp.alpha(), mp.beta(), mp.theta());
        let n = self.s_eig.dim();
        // cotangent of the feature-side quantity (log S, S^θ, chol S^θ, S^{2θ})
        let mut g_feat = Mat::zeros(n, n);
        let mut dp = Vec::with_capacity(self.classes.len());
        let mut da = Vec::with_capacity(self.classes.len());
        for ((cache, a), &c) in self.classes.iter().zip(&self.a).zip(dlogits) {
            let (gp, ga) = match (cache, &self.feature) {
                (ClassCache::Lem { e, log_p }, FeatureCache::Lem { log_s }) => {
                    let g = oi_apply(a, alpha, beta) * c;
                    g_feat += &g;
                    (-e.diff(MatFn::Log, &g), oi_apply(&(log_s - log_p), alpha, beta) * c)
                }
                (ClassCache::Em { e, p_pow }, FeatureCache::Pow { s_pow }) => {
                    let g = oi_apply(a, alpha, beta) * (c / theta);
                    g_feat += &g;
                    (-vjp_pow(e, theta, &g), oi_apply(&(s_pow - p_pow), alpha, beta) * (c / theta))
                }
                (ClassCache::Aim { e, b, ey, log_y }, FeatureCache::Pow { s_pow }) => {
                    let g_y = ey.diff(MatFn::Log, &(oi_apply(a, alpha, beta) * (c / theta)));
                    g_feat += b * &g_y * b;
                    let g_b = &g_y * b * s_pow + s_pow * b * &g_y;
                    (e.diff(MatFn::Pow(-0.5 * theta), &sym(&g_b)), oi_apply(log_y, alpha, beta) * (c / theta))
                }
                (ClassCache::Lcm { e, l, z }, FeatureCache::Lcm { z: zs, .. }) => {
                    let g_z = crate::symlin::half_lower(a) * (c / theta);
                    g_feat += &g_z;
                    let g_p_pow = vjp_log_chol(l, &(-&g_z));
                    let d = zs - z;
                    (vjp_pow(e, theta, &g_p_pow), (&d + d.transpose() - Mat::from_diagonal(&d.diagonal())) * (0.5 * c / theta))
                }
                (ClassCache::Bwm { e, ew, l, x, m }, FeatureCache::Bwm { s_pow }) => {
                    let kappa = c / (4.0 * theta);
                    // score = κ⟨M, X⟩ with M = F + Fᵀ − 2 Pw, X = L_{Pw}[L̄ A L̄ᵀ]
                    let g_f = x * (2.0 * kappa);
                    let (g_pw_sqrt, g_s) = prod_sqrt_backward(ew, s_pow, &g_f)?;
                    g_feat += &g_s;
                    let (d_n, d_pw_lyap) = lyap_vjp_cached(ew, x, &(m * kappa));
                    let g_l = lower(&(&d_n * l * a * 2.0));
                    let g_pw = g_pw_sqrt + d_pw_lyap - x * (2.0 * kappa) + vjp_chol_mat(l, &g_l);
                    let ga = sym(&(l.transpose() * &d_n * l));
                    (vjp_pow(e, mp.power(), &g_pw), ga)
                }
                _ => unreachable!("class cache always matches the feature cache"),
            };
            dp.push(SymmetricMatrix::from_mat_unchecked(sym(&gp)));
            da.push(SymmetricMatrix::from_mat_unchecked(sym(&ga)));
        }
        let ds = match &self.feature {
            FeatureCache::Lem { .. } => self.s_eig.diff(MatFn::Log, &sym(&g_feat)),
            FeatureCache::Pow { .. } => vjp_pow(&self.s_eig, theta, &g_feat),
            FeatureCache::Lcm { k, .. } => vjp_pow(&self.s_eig, theta, &vjp_log_chol(k, &g_feat)),
            FeatureCache::Bwm { .. } => vjp_pow(&self.s_eig, mp.power(), &g_feat),
        };
        Ok(SpdGrad { ds: SymmetricMatrix::from_mat_unchecked(sym(&ds)), dp, da })
    }
}

/// Adjoint of `X ↦ ⌊L⌋ + dlog 𝔻(L)`, `L = chol(X)`, given the cotangent
/// `G_Z` of the log-Cholesky coordinates.
pub(crate) fn vjp_log_chol(l: &Mat, g_z: &Mat) -> Mat {
    let mut g_l = strict_lower(g_z);
    for j in 0..l.nrows() {
        g_l[(j, j)] = g_z[(j, j)] / l[(j, j)];
    }
    vjp_chol_mat(l, &g_l)
}

/// `∂⟨G, log X⟩/∂X` in the ambient space for `X ∈ SO(3)`, matching the
/// decomposition-free logarithm `k(θ)(X − Xᵀ)`.
pub(crate) fn so3_log_ambient_vjp(x: &Mat, g: &Mat) -> Mat {
    let anti = x - x.transpose();
    let s = 0.5 * {
        let w = [anti[(2, 1)], anti[(0, 2)], anti[(1, 0)]];
        (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
    };
    let c = 0.5 * (x.trace() - 1.0);
    let angle = s.atan2(c);
    let (k, dk) = if angle < SMALL_ANGLE {
        (0.5 * (1.0 + angle * angle / 6.0), 1.0 / 12.0 + angle * angle / 30.0)
    } else {
        (angle / (2.0 * s), (s - angle * c) / (4.0 * s * s * s))
    };
    // k depends on X through θ = arccos((tr X − 1)/2)
    let n = x.nrows();
    (g - g.transpose()) * k - Mat::identity(n, n) * (frob_inner(g, &anti) * dk)
}

impl LieTape {
    pub fn record(s: &[RotationMatrix], layer: &LieMlrLayer) -> Result<Self> {
        require_same_dim(layer.blocks(), s.len())?;
        if layer.dim() != 3 {
            return Err(Error::Shape { expected: "SO(3) blocks".into(), got: format!("SO({})", layer.dim()) });
        }
        let mut logs = Vec::with_capacity(layer.classes());
        let mut scores = Vec::with_capacity(layer.classes());
        for (pk, ak) in layer.points().iter().zip(layer.tangents()) {
            let mut row = Vec::with_capacity(pk.len());
            let mut score = 0.0;
            for ((p, a), sb) in pk.iter().zip(ak).zip(s) {
                require_same_dim(3, sb.dim())?;
                let log = so_log(p, sb)?.into_inner();
                score += frob_inner(&log, a);
                row.push(log);
            }
            logs.push(row);
            scores.push(score);
        }
        Ok(Self {
            s: s.to_vec(),
            p: layer.points().to_vec(),
            a: layer.tangents().iter().map(|ak| ak.iter().map(|a| a.as_mat().clone()).collect()).collect(),
            logs,
            logits: Logits::new(scores)?,
        })
    }

    pub fn logits(&self) -> &Logits {
        &self.logits
    }

    pub fn backward(&self, dlogits: &[f64]) -> Result<LieGrad> {
        require_same_dim(self.p.len(), dlogits.len())?;
        let blocks = self.s.len();
        let mut ds_amb = vec![Mat::zeros(3, 3); blocks];
        let mut dp = Vec::with_capacity(self.p.len());
        let mut da = Vec::with_capacity(self.p.len());
        for (((pk, ak), logs), &c) in self.p.iter().zip(&self.a).zip(&self.logs).zip(dlogits) {
            let mut dp_row = Vec::with_capacity(blocks);
            let mut da_row = Vec::with_capacity(blocks);
            for (b, ((p, a), log)) in pk.iter().zip(ak).zip(logs).enumerate() {
                let x = p.transpose() * &*self.s[b];
                let g_x = so3_log_ambient_vjp(&x, &(a * c));
                // X = Pᵀ S
                ds_amb[b] += &**p * &g_x;
                dp_row.push(so_project(p, &(&*self.s[b] * g_x.transpose())));
                da_row.push(SkewMatrix::from_mat_unchecked(log * c));
            }
            dp.push(dp_row);
            da.push(da_row);
        }
        let ds = self.s.iter().zip(&ds_amb).map(|(s, g)| so_project(s, g)).collect();
        Ok(LieGrad { ds, dp, da })
    }
}

impl LogEigTape {
    pub fn record(s: &SpdMatrix, layer: &LogEigLayer) -> Result<Self> {
        require_same_dim(layer.dim(), s.dim())?;
        let s_eig = eig_mat(s)?;
        s_eig.check_domain(MatFn::Log)?;
        let v = sym_vec(&s_eig.apply(MatFn::Log));
        let out = layer.weight() * nalgebra::DVector::from_column_slice(&v);
        let logits = Logits::new(out.iter().zip(layer.bias()).map(|(x, b)| x + b).collect())?;
        Ok(Self { s_eig, v, weight: layer.weight().clone(), logits })
    }

    pub fn logits(&self) -> &Logits {
        &self.logits
    }

    pub fn backward(&self, dlogits: &[f64]) -> Result<LogEigGrad> {
        require_same_dim(self.weight.nrows(), dlogits.len())?;
        let c = nalgebra::DVector::from_column_slice(dlogits);
        let dw = &c * nalgebra::RowDVector::from_row_slice(&self.v);
        let g_v = self.weight.transpose() * &c;
        let g_log = sym_vec_adjoint(g_v.as_slice(), self.s_eig.dim());
        let ds = self.s_eig.diff(MatFn::Log, &g_log);
        Ok(LogEigGrad { ds: SymmetricMatrix::from_mat_unchecked(ds), dw, db: dlogits.to_vec() })
    }
}

impl Tape {
    pub fn logits(&self) -> &Logits {
        match self {
            Tape::Spd(t) => t.logits(),
            Tape::Lie(t) => t.logits(),
            Tape::LogEig(t) => t.logits(),
        }
    }

    pub fn backward(&self, dlogits: &[f64]) -> Result<GradBundle> {
        Ok(match self {
            Tape::Spd(t) => GradBundle::Spd(t.backward(dlogits)?),
            Tape::Lie(t) => GradBundle::Lie(t.backward(dlogits)?),
            Tape::LogEig(t) => GradBundle::LogEig(t.backward(dlogits)?),
        })
    }

    /// Cross-entropy loss at `label` and its full gradient.
    pub fn loss_and_grad(&self, label: usize) -> Result<(f64, GradBundle)> {
        let (loss, dlogits) = softmax_xent(self.logits(), label)?;
        Ok((loss, self.backward(&dlogits)?))
    }
}

/// Loss and gradients of an SPD head on one labelled sample.
pub fn grad_spd_mlr(s: &SpdMatrix, layer: &SpdMlrLayer, label: usize) -> Result<(f64, SpdGrad)> {
    let tape = SpdTape::record(s, layer)?;
    let (loss, dlogits) = softmax_xent(tape.logits(), label)?;
    Ok((loss, tape.backward(&dlogits)?))
}

/// Loss and gradients of the Lie head on one labelled sample.
pub fn grad_lie_mlr(s: &[RotationMatrix], layer: &LieMlrLayer, label: usize) -> Result<(f64, LieGrad)> {
    let tape = LieTape::record(s, layer)?;
    let (loss, dlogits) = softmax_xent(tape.logits(), label)?;
    Ok((loss, tape.backward(&dlogits)?))
}

/// Loss and gradients of the LogEig head on one labelled sample.
pub fn grad_logeig(s: &SpdMatrix, layer: &LogEigLayer, label: usize) -> Result<(f64, LogEigGrad)> {
    let tape = LogEigTape::record(s, layer)?;
    let (loss, dlogits) = softmax_xent(tape.logits(), label)?;
    Ok((loss, tape.backward(&dlogits)?))
}
