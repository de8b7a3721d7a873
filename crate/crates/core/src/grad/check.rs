//! Finite-difference oracle and the registry of primitive adjoints it checks.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::{prod_sqrt_backward, so3_log_ambient_vjp, vjp_chol_mat, vjp_log_chol};
use crate::error::Result;
use crate::rmlr::{
    log_cholesky_coords, logeig_logits, softmax_xent, spd_mlr_logits, lie_mlr_logits, LieMlrLayer, LogEigLayer,
    SpdMlrLayer,
};
use crate::sample;
use crate::songeo::{so3_log, so_retract, RotationMatrix, SkewMatrix};
use crate::spdgeo::{oi_apply, oi_inner_mat, riexp_aim_mat};
use crate::symlin::{
    chol_diff_mat, chol_inv_diff_mat, chol_mat, eig_mat, frob_inner, lower, lyap_vjp_cached, prod_sqrt_cached, sym,
    Mat, MatFn, SpdMatrix, SymmetricMatrix,
};

/// Outcome of a finite-difference comparison over a set of directions.
#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    /// Worst relative error over all directions.
    pub max_rel_err: f64,
    /// Direction attaining it.
    pub worst: usize,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
}

/// Compares analytic directional derivatives with central differences
/// `(f(i, h) − f(i, −h)) / 2h`, where `f(i, t)` evaluates the function moved
/// by `t` along direction `i`.
///
/// The relative error of a direction is `|a − d| / max(|a|, |d|, 1e-2 · max|d|)`;
/// the floor keeps directions whose derivative is tiny compared with the
/// largest one from being judged on roundoff alone.
pub fn fd_check(f: impl Fn(usize, f64) -> f64, analytic: &[f64], h: f64) -> FdReport {
    let numeric: Vec<f64> = (0..analytic.len()).map(|i| (f(i, h) - f(i, -h)) / (2.0 * h)).collect();
    let scale = numeric.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let floor = (1e-2 * scale).max(f64::MIN_POSITIVE);
    let mut max_rel_err = 0.0;
    let mut worst = 0;
    for (i, (a, d)) in analytic.iter().zip(&numeric).enumerate() {
        let err = (a - d).abs() / a.abs().max(d.abs()).max(floor);
        // NaN compares false, so test it explicitly
        if err > max_rel_err || err.is_nan() {
            max_rel_err = if err.is_nan() { f64::INFINITY } else { err };
            worst = i;
        }
    }
    FdReport { max_rel_err, worst, analytic: analytic.to_vec(), numeric }
}

/// Orthonormal basis of Sym(n) under the Frobenius product.
pub fn sym_basis(n: usize) -> Vec<Mat> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut e = Mat::zeros(n, n);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = h;
                e[(j, i)] = h;
            }
            out.push(e);
        }
    }
    out
}

/// Orthonormal basis of so(n) under the Frobenius product.
pub fn skew_basis(n: usize) -> Vec<Mat> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut e = Mat::zeros(n, n);
            e[(i, j)] = h;
            e[(j, i)] = -h;
            out.push(e);
        }
    }
    out
}

fn lower_basis(n: usize) -> Vec<Mat> {
    let mut out = Vec::new();
    for j in 0..n {
        for i in j..n {
            let mut e = Mat::zeros(n, n);
            e[(i, j)] = 1.0;
            out.push(e);
        }
    }
    out
}

/// Kind of a primitive's input: how it is sampled and perturbed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InputKind {
    /// SPD with the given condition number, perturbed additively.
    Spd(f64),
    /// Symmetric, perturbed additively.
    Sym,
    /// Lower triangular with a positive diagonal, perturbed additively.
    Lower,
    /// SO(3) rotation, perturbed through the QR retraction.
    Rotation3,
    /// Sampled like `Spd` but held fixed (not differentiated).
    FixedSpd(f64),
}

/// A primitive and its hand-written adjoint. `vjp` receives the inputs and
/// the output cotangent and returns one ambient gradient per non-fixed input.
#[derive(Clone, Copy, Debug)]
pub struct VjpCase {
    pub name: &'static str,
    pub inputs: &'static [InputKind],
    pub forward: fn(&[Mat]) -> Result<Mat>,
    pub vjp: fn(&[Mat], &Mat) -> Result<Vec<Mat>>,
}

fn sample_input(kind: InputKind, rng: &mut dyn RngCore, n: usize) -> Mat {
    match kind {
        InputKind::Spd(cond) | InputKind::FixedSpd(cond) => sample::spd(rng, n, cond).into_inner(),
        InputKind::Sym => sample::symmetric(rng, n, 1.0).into_inner(),
        InputKind::Lower => {
            let mut l = lower(&sample::gaussian(rng, n, n));
            for j in 0..n {
                l[(j, j)] = l[(j, j)].abs() + 0.5;
            }
            l
        }
        InputKind::Rotation3 => sample::rotation3_bounded(rng, 2.5).into_inner(),
    }
}

/// Checks one primitive on a random instance of size `n` (3 for rotations)
/// against central differences of `⟨G, forward(x)⟩` for a random `G`.
pub fn check_vjp_case(case: &VjpCase, rng: &mut dyn RngCore, n: usize, h: f64) -> Result<FdReport> {
    let n = if case.inputs.contains(&InputKind::Rotation3) { 3 } else { n };
    let x: Vec<Mat> = case.inputs.iter().map(|&k| sample_input(k, rng, n)).collect();
    let y = (case.forward)(&x)?;
    let g = Mat::from_fn(y.nrows(), y.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
    let grads = (case.vjp)(&x, &g)?;

    // (input index, direction) pairs with the analytic directional derivative
    let mut dirs = Vec::new();
    let mut analytic = Vec::new();
    let mut gi = 0;
    for (i, &kind) in case.inputs.iter().enumerate() {
        let basis = match kind {
            InputKind::FixedSpd(_) => continue,
            InputKind::Spd(_) | InputKind::Sym => sym_basis(n),
            InputKind::Lower => lower_basis(n),
            InputKind::Rotation3 => skew_basis(3),
        };
        let grad = &grads[gi];
        gi += 1;
        for e in basis {
            let a = match kind {
                InputKind::Rotation3 => frob_inner(grad, &(&x[i] * &e)),
                _ => frob_inner(grad, &e),
            };
            analytic.push(a);
            dirs.push((i, kind, e));
        }
    }
    let f = |d: usize, t: f64| {
        let (i, kind, e) = &dirs[d];
        let mut xs = x.clone();
        xs[*i] = match kind {
            InputKind::Rotation3 => so_retract(
                &RotationMatrix::from_mat_unchecked(x[*i].clone()),
                &SkewMatrix::skew_part(&(e * t)),
            )
            .into_inner(),
            _ => &x[*i] + e * t,
        };
        (case.forward)(&xs).map(|y| frob_inner(&g, &y)).unwrap_or(f64::NAN)
    };
    Ok(fd_check(f, &analytic, h))
}

const OI_ALPHA: f64 = 1.3;
const OI_BETA: f64 = -0.2;

fn spectral(x: &Mat, f: MatFn) -> Result<Mat> {
    let e = eig_mat(&sym(x))?;
    e.check_domain(f)?;
    Ok(e.apply(f))
}

fn spectral_vjp(x: &Mat, f: MatFn, g: &Mat) -> Result<Vec<Mat>> {
    let e = eig_mat(&sym(x))?;
    Ok(vec![e.diff(f, &sym(g))])
}

/// Every primitive adjoint used by the heads.
pub fn primitive_cases() -> Vec<VjpCase> {
    vec![
        VjpCase {
            name: "funcm_log",
            inputs: &[InputKind::Spd(50.0)],
            forward: |x| spectral(&x[0], MatFn::Log),
            vjp: |x, g| spectral_vjp(&x[0], MatFn::Log, g),
        },
        VjpCase {
            name: "funcm_sqrt",
            inputs: &[InputKind::Spd(50.0)],
            forward: |x| spectral(&x[0], MatFn::Sqrt),
            vjp: |x, g| spectral_vjp(&x[0], MatFn::Sqrt, g),
        },
        VjpCase {
            name: "funcm_pow",
            inputs: &[InputKind::Spd(50.0)],
            forward: |x| spectral(&x[0], MatFn::Pow(-0.35)),
            vjp: |x, g| spectral_vjp(&x[0], MatFn::Pow(-0.35), g),
        },
        VjpCase {
            name: "funcm_exp",
            inputs: &[InputKind::Sym],
            forward: |x| spectral(&x[0], MatFn::Exp),
            vjp: |x, g| spectral_vjp(&x[0], MatFn::Exp, g),
        },
        VjpCase {
            name: "chol",
            inputs: &[InputKind::Spd(50.0)],
            forward: |x| chol_mat(&sym(&x[0])),
            vjp: |x, g| Ok(vec![vjp_chol_mat(&chol_mat(&x[0])?, g)]),
        },
        VjpCase {
            // linear in V; its adjoint is the Cholesky adjoint at P
            name: "chol_diff",
            inputs: &[InputKind::FixedSpd(50.0), InputKind::Sym],
            forward: |x| Ok(chol_diff_mat(&chol_mat(&x[0])?, &sym(&x[1]))),
            vjp: |x, g| Ok(vec![vjp_chol_mat(&chol_mat(&x[0])?, g)]),
        },
        VjpCase {
            name: "chol_inv_diff",
            inputs: &[InputKind::Lower, InputKind::Lower],
            forward: |x| Ok(chol_inv_diff_mat(&x[0], &x[1])),
            vjp: |x, g| {
                let gs = g + g.transpose();
                Ok(vec![lower(&(&gs * &x[1])), lower(&(&gs * &x[0]))])
            },
        },
        VjpCase {
            name: "log_cholesky",
            inputs: &[InputKind::Spd(50.0)],
            forward: |x| log_cholesky_coords(&sym(&x[0])),
            vjp: |x, g| Ok(vec![vjp_log_chol(&chol_mat(&x[0])?, &lower(g))]),
        },
        VjpCase {
            name: "lyap_vjp",
            inputs: &[InputKind::Spd(50.0), InputKind::Sym],
            forward: |x| Ok(eig_mat(&sym(&x[0]))?.lyap(&sym(&x[1]))),
            vjp: |x, g| {
                let e = eig_mat(&x[0])?;
                let out = e.lyap(&x[1]);
                let (dv, dp) = lyap_vjp_cached(&e, &out, &sym(g));
                Ok(vec![dp, dv])
            },
        },
        VjpCase {
            name: "prod_sqrt",
            inputs: &[InputKind::Spd(20.0), InputKind::Spd(20.0)],
            forward: |x| {
                let e = eig_mat(&sym(&x[0]))?;
                e.check_domain(MatFn::Sqrt)?;
                Ok(prod_sqrt_cached(&e, &sym(&x[1]))?.0)
            },
            vjp: |x, g| {
                let (gb, ga) = prod_sqrt_backward(&eig_mat(&x[0])?, &x[1], g)?;
                Ok(vec![gb, ga])
            },
        },
        VjpCase {
            name: "oi_inner",
            inputs: &[InputKind::Sym, InputKind::Sym],
            forward: |x| Ok(Mat::from_element(1, 1, oi_inner_mat(&x[0], &x[1], OI_ALPHA, OI_BETA))),
            vjp: |x, g| {
                let c = g[(0, 0)];
                Ok(vec![oi_apply(&x[1], OI_ALPHA, OI_BETA) * c, oi_apply(&x[0], OI_ALPHA, OI_BETA) * c])
            },
        },
        VjpCase {
            name: "so3_log",
            inputs: &[InputKind::Rotation3],
            forward: |x| Ok(so3_log(&RotationMatrix::from_mat_unchecked(x[0].clone()))?.into_inner()),
            vjp: |x, g| Ok(vec![so3_log_ambient_vjp(&x[0], g)]),
        },
    ]
}

fn spd_loss(s: &Mat, layer_p: &[Mat], layer: &SpdMlrLayer, a: &[Mat], label: usize) -> f64 {
    let eval = || -> Result<f64> {
        let p = layer_p.iter().map(|m| SpdMatrix::from_mat_unchecked(m.clone())).collect();
        let a = a.iter().map(|m| SymmetricMatrix::from_mat_unchecked(m.clone())).collect();
        let l = SpdMlrLayer::new(*layer.metric(), p, a)?;
        let z = spd_mlr_logits(&SpdMatrix::from_mat_unchecked(s.clone()), &l)?;
        Ok(softmax_xent(&z, label)?.0)
    };
    eval().unwrap_or(f64::NAN)
}

/// End-to-end check of an SPD head: the feature and every `P_k` are moved
/// along `riexp_aim`, every `A_k` additively.
pub fn gradcheck_spd(s: &SpdMatrix, layer: &SpdMlrLayer, label: usize, h: f64) -> Result<FdReport> {
    let (_, g) = super::grad_spd_mlr(s, layer, label)?;
    let n = s.dim();
    let basis = sym_basis(n);
    let c = layer.classes();
    let p: Vec<Mat> = layer.points().iter().map(|m| m.as_mat().clone()).collect();
    let a: Vec<Mat> = layer.tangents().iter().map(|m| m.as_mat().clone()).collect();
    // direction d: block d / |basis| (0 = S, 1..=C = P_k, C+1.. = A_k)
    let mut analytic = Vec::new();
    for block in 0..(1 + 2 * c) {
        let grad = match block {
            0 => &g.ds,
            b if b <= c => &g.dp[b - 1],
            b => &g.da[b - 1 - c],
        };
        analytic.extend(basis.iter().map(|e| frob_inner(grad, e)));
    }
    let m = basis.len();
    let f = |d: usize, t: f64| {
        let (block, e) = (d / m, &basis[d % m]);
        let moved = |x: &Mat| riexp_aim_mat(x, &(e * t)).unwrap_or_else(|_| Mat::from_element(n, n, f64::NAN));
        let mut sp = s.as_mat().clone();
        let mut pp = p.clone();
        let mut ap = a.clone();
        match block {
            0 => sp = moved(&sp),
            b if b <= c => pp[b - 1] = moved(&pp[b - 1]),
            b => ap[b - 1 - c] += e * t,
        }
        spd_loss(&sp, &pp, layer, &ap, label)
    };
    Ok(fd_check(f, &analytic, h))
}

/// End-to-end check of the Lie head: rotations move along the QR
/// retraction, tangent parameters additively.
pub fn gradcheck_lie(s: &[RotationMatrix], layer: &LieMlrLayer, label: usize, h: f64) -> Result<FdReport> {
    let (_, g) = super::grad_lie_mlr(s, layer, label)?;
    let basis = skew_basis(3);
    let m = basis.len();
    let blocks = s.len();
    let c = layer.classes();
    // slots: S blocks, then P_{k,b}, then A_{k,b}
    let slots = blocks + 2 * c * blocks;
    let mut analytic = Vec::with_capacity(slots * m);
    for slot in 0..slots {
        let grad = if slot < blocks {
            &g.ds[slot]
        } else if slot < blocks + c * blocks {
            let q = slot - blocks;
            &g.dp[q / blocks][q % blocks]
        } else {
            let q = slot - blocks - c * blocks;
            &g.da[q / blocks][q % blocks]
        };
        analytic.extend(basis.iter().map(|e| frob_inner(grad, e)));
    }
    let f = |d: usize, t: f64| {
        let (slot, e) = (d / m, SkewMatrix::skew_part(&(&basis[d % m] * t)));
        let mut sp = s.to_vec();
        let (mut pp, mut ap) = layer.clone().into_parts();
        if slot < blocks {
            sp[slot] = so_retract(&sp[slot], &e);
        } else if slot < blocks + c * blocks {
            let q = slot - blocks;
            pp[q / blocks][q % blocks] = so_retract(&pp[q / blocks][q % blocks], &e);
        } else {
            let q = slot - blocks - c * blocks;
            let cur = &ap[q / blocks][q % blocks];
            ap[q / blocks][q % blocks] = SkewMatrix::skew_part(&(&**cur + &*e));
        }
        let eval = || -> Result<f64> {
            let l = LieMlrLayer::new(pp, ap)?;
            Ok(softmax_xent(&lie_mlr_logits(&sp, &l)?, label)?.0)
        };
        eval().unwrap_or(f64::NAN)
    };
    Ok(fd_check(f, &analytic, h))
}

/// End-to-end check of the LogEig head.
pub fn gradcheck_logeig(s: &SpdMatrix, layer: &LogEigLayer, label: usize, h: f64) -> Result<FdReport> {
    let (_, g) = super::grad_logeig(s, layer, label)?;
    let n = s.dim();
    let basis = sym_basis(n);
    let (w, b) = layer.clone().into_parts();
    let nw = w.len();
    let mut analytic: Vec<f64> = basis.iter().map(|e| frob_inner(&g.ds, e)).collect();
    analytic.extend(g.dw.iter());
    analytic.extend(g.db.iter());
    let m = basis.len();
    let f = |d: usize, t: f64| {
        let mut sp = s.as_mat().clone();
        let mut wp = w.clone();
        let mut bp = b.clone();
        if d < m {
            sp = riexp_aim_mat(&sp, &(&basis[d] * t)).unwrap_or_else(|_| Mat::from_element(n, n, f64::NAN));
        } else if d < m + nw {
            wp[d - m] += t;
        } else {
            bp[d - m - nw] += t;
        }
        let eval = || -> Result<f64> {
            let l = LogEigLayer::new(n, wp, bp)?;
            Ok(softmax_xent(&logeig_logits(&SpdMatrix::from_mat_unchecked(sp), &l)?, label)?.0)
        };
        eval().unwrap_or(f64::NAN)
    };
    Ok(fd_check(f, &analytic, h))
}
