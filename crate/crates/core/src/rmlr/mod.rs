//! Classifier heads. Every head maps a feature to one score per class; the
//! class probabilities are the softmax of the scores.
//!
//! The SPD heads score `⟨Log_{P_k} S, Ã_k⟩_{P_k}` where `Ã_k` is the tangent
//! parameter `A_k ∈ T_I S++(n)` moved to `P_k`. [`spd_mlr_logits`] evaluates
//! the per-family closed forms; [`rmlr_logits_generic`] composes the metric,
//! logarithm and transport of [`crate::spdgeo`] and serves as a reference.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::songeo::{so_log, so_project, RotationMatrix, SkewMatrix};
use crate::spdgeo::{metric_mat, oi_inner_mat, ptransport_mat, rielog_mat, Family, MetricParams};
use crate::symlin::{
    chol_mat, eig_mat, frob_inner, frob_norm, prod_sqrt_cached, require_same_dim, strict_lower, sym, EigenPair, Mat,
    MatFn, SpdMatrix, SymmetricMatrix,
};

/// Per-class scores, before softmax normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Logits(Vec<f64>);

impl Logits {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest score; the first one on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate() {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

fn check_tangent_param(a: &Mat) -> Result<()> {
    let norm = frob_norm(a);
    if !norm.is_finite() {
        return Err(Error::NonFinite);
    }
    if norm == 0.0 {
        return Err(Error::DegenerateHyperplane);
    }
    Ok(())
}

/// Symmetric matrix with i.i.d. normal entries of standard deviation
/// `sqrt(2/d)`, `d = n(n+1)/2`, symmetrized.
fn init_symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> SymmetricMatrix {
    let d = (n * (n + 1) / 2) as f64;
    let std = (2.0 / d).sqrt();
    let g = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal) * std);
    SymmetricMatrix::symmetrize(&g)
}

/// SPD head: metric, and per class a point `P_k` and a nonzero tangent
/// parameter `A_k` at the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMlrLayer {
    mp: MetricParams,
    p: Vec<SpdMatrix>,
    a: Vec<SymmetricMatrix>,
}

impl SpdMlrLayer {
    pub fn new(mp: MetricParams, p: Vec<SpdMatrix>, a: Vec<SymmetricMatrix>) -> Result<Self> {
        if p.is_empty() || p.len() != a.len() {
            return Err(Error::Shape { expected: format!("{} tangent parameters", p.len()), got: a.len().to_string() });
        }
        let n = p[0].dim();
        mp.validate_dim(n)?;
        for (pk, ak) in p.iter().zip(&a) {
            require_same_dim(n, pk.dim())?;
            require_same_dim(n, ak.dim())?;
            check_tangent_param(ak)?;
        }
        Ok(Self { mp, p, a })
    }

    /// `P_k = I` and random `A_k`, so every initial score is zero.
    pub fn init<R: Rng + ?Sized>(mp: MetricParams, n: usize, classes: usize, rng: &mut R) -> Result<Self> {
        let p = vec![SpdMatrix::identity(n); classes];
        let a = (0..classes).map(|_| init_symmetric(rng, n)).collect();
        Self::new(mp, p, a)
    }

    pub fn metric(&self) -> &MetricParams {
        &self.mp
    }

    pub fn dim(&self) -> usize {
        self.p[0].dim()
    }

    pub fn classes(&self) -> usize {
        self.p.len()
    }

    pub fn points(&self) -> &[SpdMatrix] {
        &self.p
    }

    pub fn tangents(&self) -> &[SymmetricMatrix] {
        &self.a
    }

    pub fn into_parts(self) -> (MetricParams, Vec<SpdMatrix>, Vec<SymmetricMatrix>) {
        (self.mp, self.p, self.a)
    }
}

/// Lie head on a product `SO(n)^m`: per class one point and one tangent
/// parameter per block.
#[derive(Clone, Debug, PartialEq)]
pub struct LieMlrLayer {
    p: Vec<Vec<RotationMatrix>>,
    a: Vec<Vec<SkewMatrix>>,
}

impl LieMlrLayer {
    pub fn new(p: Vec<Vec<RotationMatrix>>, a: Vec<Vec<SkewMatrix>>) -> Result<Self> {
        if p.is_empty() || p.len() != a.len() || p[0].is_empty() {
            return Err(Error::Shape { expected: format!("{} classes with blocks", p.len()), got: a.len().to_string() });
        }
        let blocks = p[0].len();
        let n = p[0][0].dim();
        for (pk, ak) in p.iter().zip(&a) {
            require_same_dim(blocks, pk.len())?;
            require_same_dim(blocks, ak.len())?;
            for (r, w) in pk.iter().zip(ak) {
                require_same_dim(n, r.dim())?;
                require_same_dim(n, w.dim())?;
            }
            let total: f64 = ak.iter().map(|w| frob_inner(w, w)).sum();
            if total == 0.0 {
                return Err(Error::DegenerateHyperplane);
            }
            if !total.is_finite() {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { p, a })
    }

    /// Identity points and random skew tangent parameters.
    pub fn init<R: Rng + ?Sized>(n: usize, blocks: usize, classes: usize, rng: &mut R) -> Result<Self> {
        let d = (n * (n - 1) / 2).max(1) as f64;
        let std = (2.0 / d).sqrt();
        let p = vec![vec![RotationMatrix::identity(n); blocks]; classes];
        let a = (0..classes)
            .map(|_| {
                (0..blocks)
                    .map(|_| {
                        let g = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal) * std);
                        SkewMatrix::skew_part(&g)
                    })
                    .collect()
            })
            .collect();
        Self::new(p, a)
    }

    pub fn classes(&self) -> usize {
        self.p.len()
    }

    pub fn blocks(&self) -> usize {
        self.p[0].len()
    }

    pub fn dim(&self) -> usize {
        self.p[0][0].dim()
    }

    pub fn points(&self) -> &[Vec<RotationMatrix>] {
        &self.p
    }

    pub fn tangents(&self) -> &[Vec<SkewMatrix>] {
        &self.a
    }

    pub fn into_parts(self) -> (Vec<Vec<RotationMatrix>>, Vec<Vec<SkewMatrix>>) {
        (self.p, self.a)
    }
}

/// Number of coordinates of [`sym_vec`] for `n × n` matrices.
pub fn sym_vec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper-triangular flattening, row by row, with off-diagonal entries scaled
/// by `√2` so that the Euclidean product of flattenings is the Frobenius
/// product of the matrices.
pub fn sym_vec(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(sym_vec_len(n));
    for i in 0..n {
        out.push(m[(i, i)]);
        for j in (i + 1)..n {
            out.push(std::f64::consts::SQRT_2 * m[(i, j)]);
        }
    }
    out
}

/// Adjoint of [`sym_vec`]: the symmetric matrix `G` with `⟨G, M⟩ = ⟨g, sym_vec(M)⟩`.
pub fn sym_vec_adjoint(g: &[f64], n: usize) -> Mat {
    let mut out = Mat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        out[(i, i)] = g[k];
        k += 1;
        for j in (i + 1)..n {
            let v = g[k] / std::f64::consts::SQRT_2;
            out[(i, j)] = v;
            out[(j, i)] = v;
            k += 1;
        }
    }
    out
}

/// Euclidean logistic regression on matrix-logarithm coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEigLayer {
    n: usize,
    weight: Mat,
    bias: Vec<f64>,
}

impl LogEigLayer {
    /// `weight` is `C × n(n+1)/2`, `bias` has `C` entries.
    pub fn new(n: usize, weight: Mat, bias: Vec<f64>) -> Result<Self> {
        if weight.ncols() != sym_vec_len(n) || weight.nrows() != bias.len() || bias.is_empty() {
            return Err(Error::Shape {
                expected: format!("{} x {} weight with matching bias", bias.len(), sym_vec_len(n)),
                got: format!("{} x {} weight, {} biases", weight.nrows(), weight.ncols(), bias.len()),
            });
        }
        if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { n, weight, bias })
    }

    pub fn init<R: Rng + ?Sized>(n: usize, classes: usize, rng: &mut R) -> Result<Self> {
        let d = sym_vec_len(n);
        let std = (2.0 / d as f64).sqrt();
        let weight = Mat::from_fn(classes, d, |_, _| rng.sample::<f64, _>(StandardNormal) * std);
        Self::new(n, weight, vec![0.0; classes])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn weight(&self) -> &Mat {
        &self.weight
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn into_parts(self) -> (Mat, Vec<f64>) {
        (self.weight, self.bias)
    }
}

/// `|⟨Log_P S, Ã⟩_P| / ‖Ã‖_P`, the distance from `S` to the hyperplane
/// through `P` with normal `Ã`.
pub fn margin_distance(mp: &MetricParams, s: &SpdMatrix, p: &SpdMatrix, a_tilde: &SymmetricMatrix) -> Result<f64> {
    require_same_dim(p.dim(), s.dim())?;
    require_same_dim(p.dim(), a_tilde.dim())?;
    mp.validate_dim(p.dim())?;
    let norm = metric_mat(mp, p, a_tilde, a_tilde)?.sqrt();
    if !(norm > 0.0) {
        return Err(Error::DegenerateHyperplane);
    }
    let log = rielog_mat(mp, p, s)?;
    Ok(metric_mat(mp, p, &log, a_tilde)?.abs() / norm)
}

/// Tangent parameter moved from the identity to `P` by parallel transport.
pub fn make_tilde_a_pt(mp: &MetricParams, p: &SpdMatrix, a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    require_same_dim(p.dim(), a.dim())?;
    let n = p.dim();
    ptransport_mat(mp, &Mat::identity(n, n), p, a).map(SymmetricMatrix::from_mat_unchecked)
}

/// Differential at `I` of the Cholesky left translation by `P`:
/// `L A Lᵀ` with `L = chol(P)`.
pub fn make_tilde_a_lt(p: &SpdMatrix, a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    require_same_dim(p.dim(), a.dim())?;
    let l = chol_mat(p)?;
    Ok(SymmetricMatrix::from_mat_unchecked(sym(&(&l * &**a * l.transpose()))))
}

/// Left translation for the deformed group `φ⁻¹(φ(P) ⊙ φ(·))`, `φ(X) = X^p`:
/// `(φ_{*,P})⁻¹(p L̄ A L̄ᵀ)` with `L̄ = chol(P^p)`.
pub fn make_tilde_a_lt_deformed(mp: &MetricParams, p: &SpdMatrix, a: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    require_same_dim(p.dim(), a.dim())?;
    let pw = mp.power();
    if pw == 1.0 {
        return make_tilde_a_lt(p, a);
    }
    let e = eig_mat(p)?;
    e.check_domain(MatFn::Pow(pw))?;
    let l = chol_mat(&e.apply(MatFn::Pow(pw)))?;
    let moved = &l * &**a * l.transpose() * pw;
    Ok(SymmetricMatrix::from_mat_unchecked(sym(&e.diff_inv(MatFn::Pow(pw), &moved))))
}

/// Reference scores `⟨Log_{P_k} S, Ã_k⟩_{P_k}` built from the geometric
/// primitives. BWM moves `A_k` by the deformed Cholesky translation, every
/// other family by parallel transport.
pub fn rmlr_logits_generic(s: &SpdMatrix, layer: &SpdMlrLayer) -> Result<Logits> {
    require_same_dim(layer.dim(), s.dim())?;
    let mp = layer.metric();
    let mut out = Vec::with_capacity(layer.classes());
    for (p, a) in layer.points().iter().zip(layer.tangents()) {
        let a_tilde = match mp.family() {
            Family::Bwm => make_tilde_a_lt_deformed(mp, p, a)?,
            _ => make_tilde_a_pt(mp, p, a)?,
        };
        let log = rielog_mat(mp, p, s)?;
        out.push(metric_mat(mp, p, &log, &a_tilde)?);
    }
    Logits::new(out)
}

/// Feature-side quantities shared by all classes of a closed-form head.
pub(crate) enum SpdFeature {
    /// `log S`.
    Lem(Mat),
    /// `S^θ`.
    Pow(Mat),
    /// `⌊chol S^θ⌋ + dlog 𝔻(chol S^θ)`.
    Lcm(Mat),
    /// `S^{2θ}`.
    Bwm(Mat),
}

pub(crate) fn pow_eig(e: &EigenPair, m: &Mat, power: f64) -> Result<Mat> {
    if power == 1.0 {
        return Ok(m.clone());
    }
    e.check_domain(MatFn::Pow(power))?;
    Ok(e.apply(MatFn::Pow(power)))
}

/// `⌊L⌋ + dlog 𝔻(L)` with `L = chol(X)`.
pub(crate) fn log_cholesky_coords(x: &Mat) -> Result<Mat> {
    let l = chol_mat(x)?;
    let mut z = strict_lower(&l);
    for j in 0..x.nrows() {
        z[(j, j)] = l[(j, j)].ln();
    }
    Ok(z)
}

/// `⟨D, ⌊A⌋ + ½𝔻(A)⟩` for lower-triangular `D`.
pub(crate) fn lcm_pair(d: &Mat, a: &Mat) -> f64 {
    let n = d.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        for i in (j + 1)..n {
            acc += d[(i, j)] * a[(i, j)];
        }
        acc += 0.5 * d[(j, j)] * a[(j, j)];
    }
    acc
}

impl SpdFeature {
    pub(crate) fn new(mp: &MetricParams, s: &Mat) -> Result<Self> {
        let e = eig_mat(s)?;
        Ok(match mp.family() {
            Family::Lem => {
                e.check_domain(MatFn::Log)?;
                SpdFeature::Lem(e.apply(MatFn::Log))
            }
            Family::Aim | Family::Em => SpdFeature::Pow(pow_eig(&e, s, mp.theta())?),
            Family::Lcm => SpdFeature::Lcm(log_cholesky_coords(&pow_eig(&e, s, mp.theta())?)?),
            Family::Bwm => SpdFeature::Bwm(pow_eig(&e, s, mp.power())?),
        })
    }

    /// Closed-form score against one class.
    pub(crate) fn score(&self, mp: &MetricParams, p: &Mat, a: &Mat) -> Result<f64> {
        let (alpha, beta, theta) = (mp.alpha(), mp.beta(), mp.theta());
        let e = eig_mat(p)?;
        Ok(match self {
            SpdFeature::Lem(log_s) => {
                e.check_domain(MatFn::Log)?;
                oi_inner_mat(&(log_s - e.apply(MatFn::Log)), a, alpha, beta)
            }
            SpdFeature::Pow(s_pow) if mp.family() == Family::Aim => {
                e.check_domain(MatFn::Pow(-0.5 * theta))?;
                let b = e.apply(MatFn::Pow(-0.5 * theta));
                let y = eig_mat(&sym(&(&b * s_pow * &b)))?;
                y.check_domain(MatFn::Log)?;
                oi_inner_mat(&y.apply(MatFn::Log), a, alpha, beta) / theta
            }
            SpdFeature::Pow(s_pow) => oi_inner_mat(&(s_pow - pow_eig(&e, p, theta)?), a, alpha, beta) / theta,
            SpdFeature::Lcm(zs) => {
                let zp = log_cholesky_coords(&pow_eig(&e, p, theta)?)?;
                lcm_pair(&(zs - zp), a) / theta
            }
            SpdFeature::Bwm(s_pow) => {
                let pw = pow_eig(&e, p, mp.power())?;
                let ew = if mp.power() == 1.0 { e } else { eig_mat(&pw)? };
                ew.check_domain(MatFn::Sqrt)?;
                let (ps, sp) = prod_sqrt_cached(&ew, s_pow)?;
                let m = ps + sp - &pw * 2.0;
                let l = chol_mat(&pw)?;
                let x = ew.lyap(&(&l * a * l.transpose()));
                frob_inner(&m, &x) / (4.0 * theta)
            }
        })
    }
}

/// Closed-form SPD scores, the training path.
pub fn spd_mlr_logits(s: &SpdMatrix, layer: &SpdMlrLayer) -> Result<Logits> {
    require_same_dim(layer.dim(), s.dim())?;
    let mp = layer.metric();
    let feature = SpdFeature::new(mp, s)?;
    let scores = layer
        .points()
        .iter()
        .zip(layer.tangents())
        .map(|(p, a)| feature.score(mp, p, a))
        .collect::<Result<Vec<_>>>()?;
    Logits::new(scores)
}

/// How a Lie tangent parameter given at `Q` reaches `P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LieMove {
    /// Parallel transport, `P Qᵀ H`.
    Transport,
    /// Differential of the left translation by `P Q⁻¹`, `P Q⁻¹ H`.
    Translation,
}

/// Moves the ambient tangent vector `H ∈ T_Q SO(n)` to `T_P SO(n)`.
pub fn lie_move(path: LieMove, p: &RotationMatrix, q: &RotationMatrix, h: &Mat) -> Mat {
    match path {
        LieMove::Transport => &**p * q.transpose() * h,
        LieMove::Translation => &**p * &*q.inverse() * h,
    }
}

/// Lie scores `Σ_b ⟨log(P_{k,b}ᵀ S_b), Ã_{k,b}⟩` where `Ã` is obtained from
/// `A` at the identity by `path` and read back in the Lie-algebra
/// representation `skew(Pᵀ Ã)`.
pub fn lie_mlr_logits_via(s: &[RotationMatrix], layer: &LieMlrLayer, path: LieMove) -> Result<Logits> {
    require_same_dim(layer.blocks(), s.len())?;
    let n = layer.dim();
    let id = RotationMatrix::identity(n);
    let mut out = Vec::with_capacity(layer.classes());
    for (pk, ak) in layer.points().iter().zip(layer.tangents()) {
        let mut score = 0.0;
        for ((p, a), sb) in pk.iter().zip(ak).zip(s) {
            require_same_dim(n, sb.dim())?;
            let log = so_log(p, sb)?;
            let ambient = lie_move(path, p, &id, a);
            let alg = so_project(p, &ambient);
            score += frob_inner(&log, &alg);
        }
        out.push(score);
    }
    Logits::new(out)
}

/// Lie scores; both tangent-parameter paths coincide in the algebra.
pub fn lie_mlr_logits(s: &[RotationMatrix], layer: &LieMlrLayer) -> Result<Logits> {
    lie_mlr_logits_via(s, layer, LieMove::Transport)
}

/// `W · sym_vec(log S) + b`.
pub fn logeig_logits(s: &SpdMatrix, layer: &LogEigLayer) -> Result<Logits> {
    require_same_dim(layer.dim(), s.dim())?;
    let e = eig_mat(s)?;
    e.check_domain(MatFn::Log)?;
    let v = nalgebra::DVector::from_vec(sym_vec(&e.apply(MatFn::Log)));
    let out = layer.weight() * v;
    Logits::new(out.iter().zip(layer.bias()).map(|(x, b)| x + b).collect())
}

/// Cross-entropy of the softmax of `logits` at `label`, and its gradient
/// with respect to the logits.
pub fn softmax_xent(logits: &Logits, label: usize) -> Result<(f64, Vec<f64>)> {
    let z = logits.values();
    if label >= z.len() {
        return Err(Error::Label { label, classes: z.len() });
    }
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - z[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests;
