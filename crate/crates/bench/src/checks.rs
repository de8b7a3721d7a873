//! Invariant suites over random instances. Each record names the module,
//! the invariant, the seed it was drawn from and the worst error seen.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rmlr_core::error::Error;
use rmlr_core::grad::{
    check_vjp_case, grad_spd_mlr, gradcheck_lie, gradcheck_logeig, gradcheck_spd, primitive_cases, GradBundle,
    InputKind, VjpCase,
};
use rmlr_core::rmlr::{
    lie_mlr_logits, lie_mlr_logits_via, make_tilde_a_lt_deformed, make_tilde_a_pt, margin_distance,
    rmlr_logits_generic, spd_mlr_logits, LieMlrLayer, LieMove, LogEigLayer, SpdMlrLayer,
};
use rmlr_core::sample;
use rmlr_core::songeo::{so3_exp, so3_log};
use rmlr_core::spdgeo::{chol_group_op, metric, ptransport, rielog, riexp_aim, Family, MetricParams};
use rmlr_core::symlin::{
    chol, frob_norm, funcm, lyap_solve, lyap_vjp, rel_err, sym, Mat, MatFn, SpdMatrix, SymmetricMatrix,
};

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Geometry,
    Gradients,
    Equivalence,
    Limits,
    All,
}

impl FromStr for Suite {
    type Err = BenchError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometry" => Ok(Suite::Geometry),
            "gradients" => Ok(Suite::Gradients),
            "equivalence" => Ok(Suite::Equivalence),
            "limits" => Ok(Suite::Limits),
            "all" => Ok(Suite::All),
            other => Err(BenchError::Usage(format!("unknown suite '{other}'"))),
        }
    }
}

/// Worst error of one invariant over its instances.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub module: &'static str,
    pub invariant: String,
    pub seed: u64,
    pub instances: usize,
    pub worst: f64,
    pub tol: f64,
    pub note: String,
}

impl CheckRecord {
    fn new(module: &'static str, invariant: impl Into<String>, seed: u64, tol: f64) -> Self {
        Self { module, invariant: invariant.into(), seed, instances: 0, worst: 0.0, tol, note: String::new() }
    }

    /// Records one error; NaN counts as a failure.
    fn add(&mut self, err: f64) {
        self.instances += 1;
        let err = if err.is_nan() { f64::INFINITY } else { err };
        self.worst = self.worst.max(err);
    }

    fn fail_with(&mut self, e: impl std::fmt::Display) {
        self.instances += 1;
        self.worst = f64::INFINITY;
        if self.note.is_empty() {
            self.note = e.to_string();
        }
    }

    pub fn passed(&self) -> bool {
        self.instances > 0 && self.worst <= self.tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub records: Vec<CheckRecord>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.records.iter().all(CheckRecord::passed)
    }

    pub fn failures(&self) -> Vec<&CheckRecord> {
        self.records.iter().filter(|r| !r.passed()).collect()
    }

    pub fn find(&self, module: &str, invariant: &str) -> Option<&CheckRecord> {
        self.records.iter().find(|r| r.module == module && r.invariant == invariant)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("suite {} ({:.1}s)\n", self.suite, self.seconds);
        for r in &self.records {
            let _ = write!(
                out,
                "{} {:<8} {:<34} seed={} n={} worst={:.3e} tol={:.1e}",
                if r.passed() { "PASS" } else { "FAIL" },
                r.module,
                r.invariant,
                r.seed,
                r.instances,
                r.worst,
                r.tol
            );
            if !r.note.is_empty() {
                let _ = write!(out, "  {}", r.note);
            }
            out.push('\n');
        }
        let _ = writeln!(out, "{}", if self.passed() { "OK" } else { "FAILED" });
        out
    }
}

fn finish(suite: &str, records: Vec<CheckRecord>, start: Instant) -> SuiteReport {
    SuiteReport { suite: suite.into(), records, seconds: start.elapsed().as_secs_f64() }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn family_index(f: Family) -> u64 {
    Family::ALL.iter().position(|&g| g == f).unwrap() as u64
}

/// θ values exercised per family (the candidate grids, trimmed).
pub fn thetas(f: Family) -> &'static [f64] {
    match f {
        Family::Lem => &[1.0],
        Family::Bwm => &[0.25, 0.5, 0.75],
        _ => &[0.5, 1.0, 1.5],
    }
}

/// Random valid `(α, β)` for dimension `n`.
fn random_weights(r: &mut ChaCha8Rng, n: usize) -> (f64, f64) {
    let alpha = 0.5 + 1.5 * r.random::<f64>();
    let beta = (r.random::<f64>() - 0.5) * alpha / n as f64;
    (alpha, beta)
}

fn conj(o: &Mat, m: &Mat) -> Mat {
    sym(&(o * m * o.transpose()))
}

fn smat(m: Mat) -> SymmetricMatrix {
    SymmetricMatrix::symmetrize(&m)
}

fn pmat(m: Mat) -> SpdMatrix {
    SpdMatrix::from_mat_unchecked(m)
}

/// Instances per family in the geometry suite.
pub const GEOMETRY_INSTANCES: usize = 105;

fn geometry_instance(f: Family, seed: u64, i: usize) -> std::result::Result<[f64; 6], Error> {
    let mut r = rng_for(seed, 100 * family_index(f) + i as u64);
    let n = 2 + i % 7;
    let theta = thetas(f)[i % thetas(f).len()];
    let (alpha, beta) = random_weights(&mut r, n);
    let mp = MetricParams::new(f, theta, alpha, beta)?;
    let p = sample::spd(&mut r, n, 50.0);
    let q = sample::spd(&mut r, n, 50.0);
    let v = sample::symmetric(&mut r, n, 1.0);
    let w = sample::symmetric(&mut r, n, 1.0);
    let o = sample::orthogonal(&mut r, n);
    // BWM transport is only defined from the identity
    let from = if f == Family::Bwm { SpdMatrix::identity(n) } else { p.clone() };

    let rt = rel_err(riexp_aim(&p, &rielog(&MetricParams::aim_std(), &p, &q)?)?.as_mat(), &q);
    let spectral = rel_err(funcm(&funcm(&p.to_symmetric(), MatFn::Log)?, MatFn::Exp)?.as_mat(), &p);
    let log_exp = rt.max(spectral);

    let zero = frob_norm(rielog(&mp, &p, &p)?.as_mat()) / frob_norm(&p);

    let gvw = metric(&mp, &p, &v, &w)?;
    let gwv = metric(&mp, &p, &w, &v)?;
    let gvv = metric(&mp, &p, &v, &v)?;
    let gww = metric(&mp, &p, &w, &w)?;
    let symmetry = if gvv > 0.0 && gww > 0.0 { (gvw - gwv).abs() / (gvv * gww).sqrt() } else { f64::INFINITY };

    let moved = ptransport(&mp, &from, &q, &v)?;
    let n0 = metric(&mp, &from, &v, &v)?.sqrt();
    let n1 = metric(&mp, &q, &moved, &moved)?.sqrt();
    let isometry = (n1 - n0).abs() / n0;
    let l = rielog(&mp, &from, &q)?;
    let back = rielog(&mp, &q, &from)?;
    let carried = ptransport(&mp, &from, &q, &l)?;
    let log_to_minus_log = frob_norm(&(&*carried + &*back)) / frob_norm(&back).max(1e-12);

    let invariance = if f == Family::Lcm {
        0.0
    } else {
        let (rp, rq, rv, rw) = (pmat(conj(&o, &p)), pmat(conj(&o, &q)), smat(conj(&o, &v)), smat(conj(&o, &w)));
        let g = (metric(&mp, &rp, &rv, &rw)? - gvw).abs() / gvw.abs().max(1.0);
        let lg = rel_err(rielog(&mp, &rp, &rq)?.as_mat(), &conj(&o, rielog(&mp, &p, &q)?.as_mat()));
        g.max(lg)
    };

    Ok([log_exp, zero, symmetry, isometry, log_to_minus_log, invariance])
}


/// Identity, associativity and inverse of the Cholesky group operation.
fn cholesky_axioms(seed: u64, i: usize) -> std::result::Result<f64, Error> {
    let mut r = rng_for(seed, 5000 + i as u64);
    let n = 2 + i % 7;
    let p = sample::spd(&mut r, n, 50.0);
    let q = sample::spd(&mut r, n, 50.0);
    let t = sample::spd(&mut r, n, 20.0);
    let li = chol(&p)?.as_mat().clone().try_inverse().ok_or(Error::NonFinite)?;
    let inv = pmat(sym(&(&li * li.transpose())));
    let e = SpdMatrix::identity(n);
    let assoc = rel_err(chol_group_op(&chol_group_op(&p, &q)?, &t)?.as_mat(), chol_group_op(&p, &chol_group_op(&q, &t)?)?.as_mat());
    let axioms = rel_err(chol_group_op(&e, &p)?.as_mat(), &p)
        .max(rel_err(chol_group_op(&p, &e)?.as_mat(), &p))
        .max(assoc)
        .max(frob_norm(&(chol_group_op(&p, &inv)?.as_mat() - e.as_mat())) / (n as f64).sqrt());
    Ok(axioms)
}

const GEOMETRY_NAMES: [(&str, f64); 6] = [
    ("log_exp_roundtrip", 1e-8),
    ("zero_law", 1e-9),
    ("metric_symmetry", 1e-9),
    ("transport_isometry", 1e-8),
    ("transport_log_to_minus_log", 1e-8),
    ("orthogonal_invariance", 1e-9),
];

/// Round trips, zero laws, transport isometry, O(n)-invariance and the
/// Cholesky group axioms for every family on n = 2..8.
pub fn geometry(seed: u64) -> SuiteReport {
    let start = Instant::now();
    let mut records = Vec::new();
    for f in Family::ALL {
        let per: Vec<_> = (0..GEOMETRY_INSTANCES).into_par_iter().map(|i| geometry_instance(f, seed, i)).collect();
        let mut recs: Vec<CheckRecord> = GEOMETRY_NAMES
            .iter()
            .map(|(name, tol)| CheckRecord::new("spdgeo", format!("{name}[{f}]"), seed, *tol))
            .collect();
        for res in per {
            match res {
                Ok(errs) => recs.iter_mut().zip(errs).for_each(|(rec, e)| rec.add(e)),
                Err(e) => recs.iter_mut().for_each(|rec| rec.fail_with(&e)),
            }
        }
        // the log-Cholesky metric is not O(n)-invariant
        recs.retain(|r| !(f == Family::Lcm && r.invariant.starts_with("orthogonal_invariance")));
        records.extend(recs);
    }
    let mut axioms = CheckRecord::new("spdgeo", "cholesky_group_axioms", seed, 1e-9);
    for res in (0..GEOMETRY_INSTANCES).into_par_iter().map(|i| cholesky_axioms(seed, i)).collect::<Vec<_>>() {
        match res {
            Ok(e) => axioms.add(e),
            Err(e) => axioms.fail_with(e),
        }
    }
    records.push(axioms);
    let mut so3 = CheckRecord::new("songeo", "so3_exp_log_roundtrip", seed, 1e-9);
    let mut r = rng_for(seed, 9999);
    for _ in 0..GEOMETRY_INSTANCES {
        let x = sample::rotation3_bounded(&mut r, std::f64::consts::PI - 0.1);
        match so3_log(&x) {
            Ok(l) => so3.add(rel_err(&so3_exp(l.as_mat()), &x)),
            Err(e) => so3.fail_with(e),
        }
    }
    records.push(so3);
    finish("geometry", records, start)
}

/// θ grid of the limit suite.
pub const LIMIT_THETAS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Worst relative metric deviation of (θ,α,β)-EM from (α,β)-LEM and of
/// 2θ-BWM from (¼,0)-LEM at each θ of [`LIMIT_THETAS`].
pub fn limit_table(seed: u64, instances: usize) -> Result<[[f64; 3]; 2]> {
    let mut table = [[0.0f64; 3]; 2];
    let mut r = rng_for(seed, 7);
    for i in 0..instances {
        let n = 2 + i % 5;
        let (alpha, beta) = random_weights(&mut r, n);
        let p = sample::spd(&mut r, n, 20.0);
        let v = sample::symmetric(&mut r, n, 1.0);
        let w = sample::symmetric(&mut r, n, 1.0);
        let lem = metric(&MetricParams::lem(alpha, beta)?, &p, &v, &w)?;
        let lem_q = metric(&MetricParams::lem(0.25, 0.0)?, &p, &v, &w)?;
        let scale = metric(&MetricParams::lem(alpha, beta)?, &p, &v, &v)?.sqrt()
            * metric(&MetricParams::lem(alpha, beta)?, &p, &w, &w)?.sqrt();
        let scale_q = metric(&MetricParams::lem(0.25, 0.0)?, &p, &v, &v)?.sqrt()
            * metric(&MetricParams::lem(0.25, 0.0)?, &p, &w, &w)?.sqrt();
        for (k, &t) in LIMIT_THETAS.iter().enumerate() {
            let em = metric(&MetricParams::em(t, alpha, beta)?, &p, &v, &w)?;
            let bw = metric(&MetricParams::bwm(t)?, &p, &v, &w)?;
            table[0][k] = table[0][k].max((em - lem).abs() / scale);
            table[1][k] = table[1][k].max((bw - lem_q).abs() / scale_q);
        }
    }
    Ok(table)
}

/// Deformation limits: deviations shrink monotonically in θ and end below 1e-3.
pub fn limits(seed: u64) -> SuiteReport {
    let start = Instant::now();
    let names = ["em_to_lem", "bwm_to_quarter_lem"];
    let records = match limit_table(seed, 50) {
        Ok(table) => names
            .iter()
            .zip(table)
            .map(|(name, row)| {
                let mut rec = CheckRecord::new("spdgeo", format!("limit_{name}"), seed, 1e-3);
                let monotone = row.windows(2).all(|w| w[1] < w[0]);
                rec.add(if monotone { row[2] } else { f64::INFINITY });
                rec.note = LIMIT_THETAS
                    .iter()
                    .zip(row)
                    .map(|(t, d)| format!("theta={t:e}: {d:.3e}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                if !monotone {
                    rec.note.push_str(" (not monotone)");
                }
                rec
            })
            .collect(),
        Err(e) => {
            let mut rec = CheckRecord::new("spdgeo", "limits", seed, 1e-3);
            rec.fail_with(e);
            vec![rec]
        }
    };
    finish("limits", records, start)
}

fn tilde_for(mp: &MetricParams, p: &SpdMatrix, a: &SymmetricMatrix) -> rmlr_core::error::Result<SymmetricMatrix> {
    match mp.family() {
        Family::Bwm => make_tilde_a_lt_deformed(mp, p, a),
        _ => make_tilde_a_pt(mp, p, a),
    }
}

/// Infimum of `sin∠(Log_P S, Log_P Y) · ‖Log_P S‖_P` over `samples` random
/// hyperplane points `Y` on S++(2), parametrized by `Log_P Y ⊥ Ã`.
pub fn sampled_margin(
    mp: &MetricParams,
    s: &SpdMatrix,
    p: &SpdMatrix,
    a_tilde: &SymmetricMatrix,
    samples: usize,
    r: &mut ChaCha8Rng,
) -> Result<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let basis = [
        SymmetricMatrix::from_diagonal(&[1.0, 0.0]),
        SymmetricMatrix::from_diagonal(&[0.0, 1.0]),
        SymmetricMatrix::from_row_slice(2, &[0.0, h, h, 0.0])?,
    ];
    let coords = |m: &Mat| [m[(0, 0)], m[(1, 1)], m[(0, 1)] / h];
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = metric(mp, p, &basis[i], &basis[j])?;
        }
    }
    let ip = |u: &[f64; 3], v: &[f64; 3]| {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += u[i] * g[i][j] * v[j];
            }
        }
        acc
    };
    let log = coords(rielog(mp, p, s)?.as_mat());
    let a = coords(a_tilde);
    let log_norm = ip(&log, &log).sqrt();
    let aa = ip(&a, &a);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let z = sample::gaussian(r, 3, 1);
        let mut y = [z[0], z[1], z[2]];
        let c = ip(&y, &a) / aa;
        for i in 0..3 {
            y[i] -= c * a[i];
        }
        let cos = ip(&y, &log) / (ip(&y, &y).sqrt() * log_norm);
        best = best.min((1.0 - cos * cos).max(0.0).sqrt());
    }
    Ok(best * log_norm)
}

/// Closed-form margin vs the sampled infimum: `(closed, sampled)`.
pub fn margin_instance(f: Family, seed: u64, i: usize, samples: usize) -> Result<(f64, f64)> {
    let mut r = rng_for(seed, 500 + 100 * family_index(f) + i as u64);
    let theta = thetas(f)[i % thetas(f).len()];
    let (alpha, beta) = random_weights(&mut r, 2);
    let mp = MetricParams::new(f, theta, alpha, beta)?;
    let p = sample::spd(&mut r, 2, 5.0);
    let s = sample::spd(&mut r, 2, 5.0);
    let a = sample::symmetric(&mut r, 2, 1.0);
    let at = tilde_for(&mp, &p, &a)?;
    let closed = margin_distance(&mp, &s, &p, &at)?;
    let sampled = sampled_margin(&mp, &s, &p, &at, samples, &mut r)?;
    Ok((closed, sampled))
}

/// Samples per margin instance in the equivalence suite.
pub const MARGIN_SAMPLES: usize = 1_000_000;
pub const MARGIN_INSTANCES: usize = 20;

/// Closed-form scores vs the generic pipeline, the Euclidean reduction, the
/// two Lie paths and the margin-distance oracle.
pub fn equivalence(seed: u64) -> SuiteReport {
    equivalence_with(seed, MARGIN_INSTANCES, MARGIN_SAMPLES)
}

pub fn equivalence_with(seed: u64, margin_instances: usize, margin_samples: usize) -> SuiteReport {
    let start = Instant::now();
    let mut records = Vec::new();
    let mut r = rng_for(seed, 1);
    for f in Family::ALL {
        let mut rec = CheckRecord::new("rmlr", format!("closed_form_vs_generic[{f}]"), seed, 1e-9);
        for &t in thetas(f) {
            for n in [2, 3, 5] {
                for _ in 0..4 {
                    let res = (|| -> Result<f64> {
                        let (alpha, beta) = random_weights(&mut r, n);
                        let mp = MetricParams::new(f, t, alpha, beta)?;
                        let p = (0..4).map(|_| sample::spd(&mut r, n, 8.0)).collect();
                        let a = (0..4).map(|_| sample::symmetric(&mut r, n, 1.0)).collect();
                        let layer = SpdMlrLayer::new(mp, p, a)?;
                        let s = sample::spd(&mut r, n, 8.0);
                        let closed = spd_mlr_logits(&s, &layer)?;
                        let generic = rmlr_logits_generic(&s, &layer)?;
                        Ok(closed
                            .values()
                            .iter()
                            .zip(generic.values())
                            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
                            .fold(0.0, f64::max))
                    })();
                    match res {
                        Ok(e) => rec.add(e),
                        Err(e) => rec.fail_with(e),
                    }
                }
            }
        }
        records.push(rec);
    }

    let mut rec = CheckRecord::new("rmlr", "euclidean_reduction", seed, 1e-12);
    for _ in 0..50 {
        let x: Vec<f64> = (0..4).map(|_| r.random::<f64>() * 3.0 + 0.1).collect();
        let p: Vec<f64> = (0..4).map(|_| r.random::<f64>() * 3.0 + 0.1).collect();
        let a: Vec<f64> = (0..4).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let res = (|| -> Result<f64> {
            let em = MetricParams::em(1.0, 1.0, 0.0)?;
            let layer = SpdMlrLayer::new(em, vec![SpdMatrix::from_diagonal(&p)?], vec![SymmetricMatrix::from_diagonal(&a)])?;
            let score = spd_mlr_logits(&SpdMatrix::from_diagonal(&x)?, &layer)?.values()[0];
            let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
            Ok((score - (dot(&x, &a) - dot(&p, &a))).abs())
        })();
        match res {
            Ok(e) => rec.add(e),
            Err(e) => rec.fail_with(e),
        }
    }
    records.push(rec);

    let mut rec = CheckRecord::new("rmlr", "lie_paths_identical", seed, 0.0);
    for _ in 0..20 {
        let res = (|| -> Result<f64> {
            let layer = LieMlrLayer::new(
                (0..3).map(|_| (0..2).map(|_| sample::rotation3_bounded(&mut r, 2.0)).collect()).collect(),
                (0..3).map(|_| (0..2).map(|_| sample::skew(&mut r, 3, 1.0)).collect()).collect(),
            )?;
            let s: Vec<_> = (0..2).map(|_| sample::rotation3_bounded(&mut r, 1.0)).collect();
            let pt = lie_mlr_logits_via(&s, &layer, LieMove::Transport)?;
            let lt = lie_mlr_logits_via(&s, &layer, LieMove::Translation)?;
            let main = lie_mlr_logits(&s, &layer)?;
            Ok(pt.values().iter().zip(lt.values()).zip(main.values())
                .map(|((a, b), c)| (a - b).abs().max((a - c).abs()))
                .fold(0.0, f64::max))
        })();
        match res {
            Ok(e) => rec.add(e),
            Err(e) => rec.fail_with(e),
        }
    }
    records.push(rec);

    for f in Family::ALL {
        let mut rec = CheckRecord::new("rmlr", format!("margin_vs_sampled_infimum[{f}]"), seed, 0.02);
        let per: Vec<_> =
            (0..margin_instances).into_par_iter().map(|i| margin_instance(f, seed, i, margin_samples)).collect();
        for res in per {
            match res {
                // the closed form is the infimum, so it may never exceed a sample
                Ok((closed, sampled)) if closed <= sampled * (1.0 + 1e-12) => {
                    rec.add((sampled - closed) / sampled.max(1e-12))
                }
                Ok((closed, sampled)) => {
                    rec.add(f64::INFINITY);
                    rec.note = format!("closed form {closed} above sampled {sampled}");
                }
                Err(e) => rec.fail_with(e),
            }
        }
        records.push(rec);
    }
    finish("equivalence", records, start)
}

const LYAP_CONDS: [&[InputKind]; 4] = [
    &[InputKind::Spd(10.0), InputKind::Sym],
    &[InputKind::Spd(1e2), InputKind::Sym],
    &[InputKind::Spd(1e3), InputKind::Sym],
    &[InputKind::Spd(1e4), InputKind::Sym],
];

fn lyap_forward(x: &[Mat]) -> rmlr_core::error::Result<Mat> {
    Ok(lyap_solve(&SpdMatrix::new(sym(&x[0]))?, &smat(sym(&x[1])))?.into_inner())
}

fn lyap_backward(x: &[Mat], g: &Mat) -> rmlr_core::error::Result<Vec<Mat>> {
    let p = SpdMatrix::new(sym(&x[0]))?;
    let out = lyap_solve(&p, &smat(sym(&x[1])))?;
    let (dv, dp) = lyap_vjp(&p, &out, &smat(sym(g)))?;
    Ok(vec![dp.into_inner(), dv.into_inner()])
}

/// `lyap_vjp` through the public API at condition numbers 10 to 1e4.
pub fn lyap_conditioning_cases() -> Vec<VjpCase> {
    LYAP_CONDS
        .iter()
        .map(|inputs| VjpCase { name: "lyap_vjp", inputs, forward: lyap_forward, vjp: lyap_backward })
        .collect()
}

/// Result of the Lyapunov backprop check: worst error over `triples`
/// random `(P, V, G)` with n ≤ 6 and condition numbers up to 1e4.
pub fn lyap_backprop(seed: u64, triples: usize) -> CheckRecord {
    let mut rec = CheckRecord::new("symlin", "lyap_vjp_conditioning", seed, 1e-5);
    let cases = lyap_conditioning_cases();
    let mut r = rng_for(seed, 3);
    for i in 0..triples {
        let n = 2 + i % 5;
        match check_vjp_case(&cases[i % cases.len()], &mut r, n, 1e-6) {
            Ok(rep) => rec.add(rep.max_rel_err),
            Err(e) => rec.fail_with(e),
        }
    }
    rec
}

/// Primitive VJPs from `cases` against central differences (1e-5).
pub fn primitive_records(cases: &[VjpCase], seed: u64, instances: usize) -> Vec<CheckRecord> {
    cases
        .par_iter()
        .enumerate()
        .map(|(k, case)| {
            let mut rec = CheckRecord::new("grad", case.name, seed, 1e-5);
            let mut r = rng_for(seed, 1000 + k as u64);
            for i in 0..instances {
                match check_vjp_case(case, &mut r, 2 + i % 5, 1e-6) {
                    Ok(rep) => rec.add(rep.max_rel_err),
                    Err(e) => rec.fail_with(e),
                }
            }
            rec
        })
        .collect()
}

fn random_spd_layer(r: &mut ChaCha8Rng, mp: MetricParams, n: usize, c: usize) -> Result<SpdMlrLayer> {
    let p = (0..c).map(|_| sample::spd(r, n, 8.0)).collect();
    let a = (0..c).map(|_| sample::symmetric(r, n, 1.0)).collect();
    Ok(SpdMlrLayer::new(mp, p, a)?)
}

fn end_to_end_records(seed: u64) -> Vec<CheckRecord> {
    let mut out: Vec<CheckRecord> = Family::ALL
        .par_iter()
        .map(|&f| {
            let tol = if f == Family::Bwm { 1e-3 } else { 1e-4 };
            let mut rec = CheckRecord::new("grad", format!("loss_gradient[{f}]"), seed, tol);
            let mut r = rng_for(seed, 2000 + family_index(f));
            for &t in thetas(f) {
                for n in [2, 3, 4] {
                    let res = (|| -> Result<f64> {
                        let (alpha, beta) = random_weights(&mut r, n);
                        let layer = random_spd_layer(&mut r, MetricParams::new(f, t, alpha, beta)?, n, 3)?;
                        let s = sample::spd(&mut r, n, 10.0);
                        Ok(gradcheck_spd(&s, &layer, r.random_range(0..3), 1e-5)?.max_rel_err)
                    })();
                    match res {
                        Ok(e) => rec.add(e),
                        Err(e) => rec.fail_with(e),
                    }
                }
            }
            rec
        })
        .collect();

    let mut r = rng_for(seed, 2100);
    let mut lie = CheckRecord::new("grad", "loss_gradient[lie]", seed, 1e-4);
    for _ in 0..5 {
        let res = (|| -> Result<f64> {
            let layer = LieMlrLayer::new(
                (0..3).map(|_| (0..2).map(|_| sample::rotation3_bounded(&mut r, 2.0)).collect()).collect(),
                (0..3).map(|_| (0..2).map(|_| sample::skew(&mut r, 3, 1.0)).collect()).collect(),
            )?;
            let s: Vec<_> = (0..2).map(|_| sample::rotation3_bounded(&mut r, 1.0)).collect();
            Ok(gradcheck_lie(&s, &layer, 2, 1e-5)?.max_rel_err)
        })();
        match res {
            Ok(e) => lie.add(e),
            Err(e) => lie.fail_with(e),
        }
    }
    out.push(lie);

    let mut le = CheckRecord::new("grad", "loss_gradient[logeig]", seed, 1e-4);
    for n in [2, 3, 5] {
        let res = (|| -> Result<f64> {
            let layer = LogEigLayer::init(n, 4, &mut r)?;
            let s = sample::spd(&mut r, n, 20.0);
            Ok(gradcheck_logeig(&s, &layer, 0, 1e-5)?.max_rel_err)
        })();
        match res {
            Ok(e) => le.add(e),
            Err(e) => le.fail_with(e),
        }
    }
    out.push(le);

    // repeated and nearly repeated eigenvalues (gaps of 1e-8)
    let mut gap = CheckRecord::new("grad", "eigen_gap_1e-8_finite", seed, 0.0);
    for f in Family::ALL {
        for &t in thetas(f) {
            let res = (|| -> Result<f64> {
                let layer = random_spd_layer(&mut r, MetricParams::new(f, t, 1.0, 0.0)?, 4, 3)?;
                let (mp, mut p, a) = layer.into_parts();
                p[0] = sample::spd_with_spectrum(&mut r, &[3.0, 3.0 - 1e-8, 0.7, 0.7 + 1e-8]);
                let layer = SpdMlrLayer::new(mp, p, a)?;
                let s = sample::spd_with_spectrum(&mut r, &[2.0, 1.0 + 1e-8, 1.0, 0.5]);
                let (loss, g) = grad_spd_mlr(&s, &layer, 0)?;
                Ok(if loss.is_finite() && GradBundle::Spd(g).is_finite() { 0.0 } else { f64::INFINITY })
            })();
            match res {
                Ok(e) => gap.add(e),
                Err(e) => gap.fail_with(e),
            }
        }
    }
    out.push(gap);
    out
}

/// Primitive adjoints, end-to-end loss gradients, eigen-gap robustness and
/// the Lyapunov backprop check, with the default primitive registry.
pub fn gradients(seed: u64) -> SuiteReport {
    gradients_with(&primitive_cases(), seed)
}

/// As [`gradients`] with a caller-supplied primitive registry.
pub fn gradients_with(cases: &[VjpCase], seed: u64) -> SuiteReport {
    let start = Instant::now();
    let mut records = primitive_records(cases, seed, 20);
    records.extend(end_to_end_records(seed));
    records.push(lyap_backprop(seed, 50));
    finish("gradients", records, start)
}

pub fn run(suite: Suite, seed: u64) -> Vec<SuiteReport> {
    match suite {
        Suite::Geometry => vec![geometry(seed)],
        Suite::Gradients => vec![gradients(seed)],
        Suite::Equivalence => vec![equivalence(seed)],
        Suite::Limits => vec![limits(seed)],
        Suite::All => vec![geometry(seed), limits(seed), equivalence(seed), gradients(seed)],
    }
}
