use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::*;
use crate::sample;
use crate::songeo::{hat, rot_z, so3_exp};
use crate::spdgeo::{chol_group_op, metric, rielog};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sd(d: &[f64]) -> SymmetricMatrix {
    SymmetricMatrix::from_diagonal(d)
}

fn pd(d: &[f64]) -> SpdMatrix {
    SpdMatrix::from_diagonal(d).unwrap()
}

fn thetas(f: Family) -> &'static [f64] {
    match f {
        Family::Bwm => &[0.25, 0.5, 0.75],
        Family::Lem => &[1.0],
        _ => &[0.5, 1.0, 1.5],
    }
}

fn params(f: Family, theta: f64) -> MetricParams {
    MetricParams::new(f, theta, 1.2, 0.15).unwrap()
}

fn random_layer(r: &mut ChaCha8Rng, mp: MetricParams, n: usize, c: usize) -> SpdMlrLayer {
    let p = (0..c).map(|_| sample::spd(r, n, 8.0)).collect();
    let a = (0..c).map(|_| sample::symmetric(r, n, 1.0)).collect();
    SpdMlrLayer::new(mp, p, a).unwrap()
}

#[test]
fn closed_form_matches_generic_pipeline() {
    let mut r = rng(1);
    for f in Family::ALL {
        for &t in thetas(f) {
            for n in [2, 3, 5] {
                let layer = random_layer(&mut r, params(f, t), n, 4);
                let s = sample::spd(&mut r, n, 8.0);
                let closed = spd_mlr_logits(&s, &layer).unwrap();
                let generic = rmlr_logits_generic(&s, &layer).unwrap();
                for (a, b) in closed.values().iter().zip(generic.values()) {
                    assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{f} θ={t} n={n}: {a} vs {b}");
                }
            }
        }
    }
}

#[test]
fn score_vanishes_at_the_class_point() {
    let mut r = rng(2);
    for f in Family::ALL {
        for &t in thetas(f) {
            let layer = random_layer(&mut r, params(f, t), 3, 3);
            for (k, p) in layer.points().iter().enumerate() {
                let z = spd_mlr_logits(p, &layer).unwrap().values()[k];
                assert!(z.abs() <= 1e-10, "{f}: {z}");
            }
        }
    }
    // all classes at the same point: every score is zero
    let p = sample::spd(&mut r, 3, 5.0);
    let a = (0..3).map(|_| sample::symmetric(&mut r, 3, 1.0)).collect();
    let layer = SpdMlrLayer::new(MetricParams::aim_std(), vec![p.clone(); 3], a).unwrap();
    let g = rmlr_logits_generic(&p, &layer).unwrap();
    assert!(g.values().iter().all(|v| v.abs() <= 1e-12));
}

#[test]
fn closed_form_examples() {
    let em = MetricParams::em(1.0, 1.0, 0.0).unwrap();
    let layer = SpdMlrLayer::new(em, vec![SpdMatrix::identity(2)], vec![sd(&[1.0, 0.0])]).unwrap();
    assert_relative_eq!(spd_mlr_logits(&pd(&[3.0, 1.0]), &layer).unwrap().values()[0], 2.0, epsilon = 1e-15);

    let bwm = MetricParams::bwm(0.5).unwrap();
    let layer = SpdMlrLayer::new(bwm, vec![SpdMatrix::identity(2)], vec![SymmetricMatrix::identity(2)]).unwrap();
    let s = pd(&[4.0, 1.0]);
    assert_relative_eq!(spd_mlr_logits(&s, &layer).unwrap().values()[0], 0.5, epsilon = 1e-14);
    assert_relative_eq!(rmlr_logits_generic(&s, &layer).unwrap().values()[0], 0.5, epsilon = 1e-14);
}

#[test]
fn euclidean_reduction() {
    // diagonal data under the flat metric: ⟨x, a⟩ − b with b = ⟨p, a⟩
    let mut r = rng(3);
    let em = MetricParams::em(1.0, 1.0, 0.0).unwrap();
    for _ in 0..20 {
        let x: Vec<f64> = (0..4).map(|_| r.random::<f64>() * 3.0 + 0.1).collect();
        let p: Vec<f64> = (0..4).map(|_| r.random::<f64>() * 3.0 + 0.1).collect();
        let a: Vec<f64> = (0..4).map(|_| r.sample::<f64, _>(StandardNormal)).collect();
        let layer = SpdMlrLayer::new(em, vec![pd(&p)], vec![sd(&a)]).unwrap();
        let score = spd_mlr_logits(&pd(&x), &layer).unwrap().values()[0];
        let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
        let expected = dot(&x, &a) - dot(&p, &a);
        assert!((score - expected).abs() <= 1e-12, "{score} vs {expected}");
    }
}

#[test]
fn margin_distance_examples() {
    let em = MetricParams::em(1.0, 1.0, 0.0).unwrap();
    let p = SpdMatrix::identity(2);
    let d = margin_distance(&em, &pd(&[4.0, 5.0]), &p, &sd(&[1.0, 0.0])).unwrap();
    assert_relative_eq!(d, 3.0, epsilon = 1e-14);
    assert_eq!(margin_distance(&em, &p, &p, &sd(&[1.0, 2.0])).unwrap(), 0.0);
    assert!(matches!(
        margin_distance(&em, &p, &p, &SymmetricMatrix::zeros(2)),
        Err(Error::DegenerateHyperplane)
    ));
}

/// `min sin∠(Log_P S, Y) · ‖Log_P S‖_P` over random `Y` with `⟨Y, Ã⟩_P = 0`.
fn sampled_margin(mp: &MetricParams, s: &SpdMatrix, p: &SpdMatrix, a_tilde: &SymmetricMatrix, samples: usize, r: &mut ChaCha8Rng) -> f64 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let basis = [sd(&[1.0, 0.0]), sd(&[0.0, 1.0]), SymmetricMatrix::from_row_slice(2, &[0.0, h, h, 0.0]).unwrap()];
    let coords = |m: &Mat| [m[(0, 0)], m[(1, 1)], m[(0, 1)] / h];
    let mut g = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            g[i][j] = metric(mp, p, &basis[i], &basis[j]).unwrap();
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
    let log = coords(&rielog(mp, p, s).unwrap());
    let a = coords(a_tilde);
    let log_norm = ip(&log, &log).sqrt();
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let mut y = [0.0; 3];
        for v in y.iter_mut() {
            *v = r.sample::<f64, _>(StandardNormal);
        }
        let c = ip(&y, &a) / ip(&a, &a);
        for i in 0..3 {
            y[i] -= c * a[i];
        }
        let cos = ip(&y, &log) / (ip(&y, &y).sqrt() * log_norm);
        best = best.min((1.0 - cos * cos).max(0.0).sqrt());
    }
    best * log_norm
}

#[test]
fn margin_distance_matches_sampled_infimum() {
    let mut r = rng(4);
    for f in Family::ALL {
        let mp = params(f, if f == Family::Bwm { 0.5 } else { 1.0 });
        for _ in 0..3 {
            let p = sample::spd(&mut r, 2, 5.0);
            let s = sample::spd(&mut r, 2, 5.0);
            let a = sample::symmetric(&mut r, 2, 1.0);
            let at = match f {
                Family::Bwm => make_tilde_a_lt_deformed(&mp, &p, &a).unwrap(),
                _ => make_tilde_a_pt(&mp, &p, &a).unwrap(),
            };
            let closed = margin_distance(&mp, &s, &p, &at).unwrap();
            let sampled = sampled_margin(&mp, &s, &p, &at, 100_000, &mut r);
            assert!(closed <= sampled * (1.0 + 1e-12), "{f}: {closed} > {sampled}");
            assert!(sampled - closed <= 0.02 * sampled.max(1e-12), "{f}: {closed} vs {sampled}");
        }
    }
}

#[test]
fn margin_distance_is_consistent_with_the_score() {
    let mut r = rng(5);
    for f in Family::ALL {
        let mp = params(f, thetas(f)[0]);
        let layer = random_layer(&mut r, mp, 3, 3);
        let s = sample::spd(&mut r, 3, 8.0);
        let scores = spd_mlr_logits(&s, &layer).unwrap();
        for (k, (p, a)) in layer.points().iter().zip(layer.tangents()).enumerate() {
            let at = match f {
                Family::Bwm => make_tilde_a_lt_deformed(&mp, p, a).unwrap(),
                _ => make_tilde_a_pt(&mp, p, a).unwrap(),
            };
            let norm = metric(&mp, p, &at, &at).unwrap().sqrt();
            let d = margin_distance(&mp, &s, p, &at).unwrap();
            let z = scores.values()[k];
            assert!((z.signum() * norm * d - z).abs() <= 1e-10 * z.abs().max(1.0), "{f}");
        }
    }
}

#[test]
fn argmax_is_invariant_to_metric_scaling() {
    let mut r = rng(6);
    for f in [Family::Lem, Family::Aim, Family::Em] {
        let mp = params(f, 1.0);
        let layer = random_layer(&mut r, mp, 3, 5);
        let (m, p, a) = layer.clone().into_parts();
        let scaled = SpdMlrLayer::new(m.scaled(4.5).unwrap(), p, a).unwrap();
        for _ in 0..10 {
            let s = sample::spd(&mut r, 3, 8.0);
            let z0 = spd_mlr_logits(&s, &layer).unwrap();
            let z1 = spd_mlr_logits(&s, &scaled).unwrap();
            assert_eq!(z0.argmax(), z1.argmax());
            for (a, b) in z0.values().iter().zip(z1.values()) {
                assert_relative_eq!(4.5 * a, b, max_relative = 1e-12, epsilon = 1e-13);
            }
        }
    }
}

#[test]
fn tilde_a_examples() {
    let mut r = rng(7);
    let a = sample::symmetric(&mut r, 3, 1.0);
    let i3 = SpdMatrix::identity(3);
    for f in Family::ALL {
        let mp = params(f, 1.0);
        assert_eq!(make_tilde_a_pt(&mp, &i3, &a).unwrap(), a);
    }
    let p = sample::spd(&mut r, 3, 5.0);
    let em = MetricParams::em(1.0, 1.0, 0.0).unwrap();
    assert!(frob_norm(&(&*make_tilde_a_pt(&em, &p, &a).unwrap() - &*a)) <= 1e-12);

    let aim = MetricParams::aim_std();
    let e11 = sd(&[1.0, 0.0]);
    let at = make_tilde_a_pt(&aim, &pd(&[4.0, 1.0]), &e11).unwrap();
    assert!(frob_norm(&(&*at - Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 0.0])))) <= 1e-13);
    assert_relative_eq!(
        metric(&aim, &pd(&[4.0, 1.0]), &at, &at).unwrap(),
        metric(&aim, &SpdMatrix::identity(2), &e11, &e11).unwrap(),
        max_relative = 1e-12
    );

    for f in [Family::Lem, Family::Aim, Family::Em, Family::Lcm] {
        let mp = params(f, 0.7);
        let at = make_tilde_a_pt(&mp, &p, &a).unwrap();
        assert_relative_eq!(metric(&mp, &p, &at, &at).unwrap(), metric(&mp, &i3, &a, &a).unwrap(), max_relative = 1e-8);
    }

    assert_eq!(make_tilde_a_lt(&i3, &a).unwrap(), a);
    let lt = make_tilde_a_lt(&pd(&[4.0, 9.0]), &SymmetricMatrix::identity(2)).unwrap();
    assert!(frob_norm(&(&*lt - Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 9.0])))) <= 1e-14);
}

#[test]
fn left_translation_is_the_group_differential() {
    let mut r = rng(8);
    let p = sample::spd(&mut r, 4, 10.0);
    let a = sample::symmetric(&mut r, 4, 1.0);
    let h = 1e-5;
    let at = |t: f64| {
        let x = crate::spdgeo::riexp_aim(&SpdMatrix::identity(4), &a.scale(t)).unwrap();
        chol_group_op(&p, &x).unwrap().into_inner()
    };
    let fd = (at(h) - at(-h)) / (2.0 * h);
    let got = make_tilde_a_lt(&p, &a).unwrap();
    assert!(frob_norm(&(&*got - &fd)) <= 1e-8 * frob_norm(&fd));

    // deformed translation: differential of X ↦ φ⁻¹(φ(P) ⊙ φ(X)) at I
    let mp = MetricParams::bwm(0.35).unwrap();
    let pw = mp.power();
    let pow = |m: &Mat, e: f64| crate::symlin::funcm(&SymmetricMatrix::symmetrize(m), MatFn::Pow(e)).unwrap().into_inner();
    let pp = SpdMatrix::from_mat_unchecked(pow(&p, pw));
    let dt = |t: f64| {
        let x = SpdMatrix::from_mat_unchecked(pow(&(Mat::identity(4, 4) + &*a * t), pw));
        pow(&chol_group_op(&pp, &x).unwrap(), 1.0 / pw)
    };
    let fd = (dt(h) - dt(-h)) / (2.0 * h);
    let got = make_tilde_a_lt_deformed(&mp, &p, &a).unwrap();
    assert!(frob_norm(&(&*got - &fd)) <= 1e-7 * frob_norm(&fd));
}

#[test]
fn lie_examples() {
    let z = hat(&[0.0, 0.0, 1.0]);
    let a = SkewMatrix::new(z.clone()).unwrap();
    let layer = LieMlrLayer::new(vec![vec![RotationMatrix::identity(3)]], vec![vec![a.clone()]]).unwrap();
    let score = lie_mlr_logits(&[rot_z(std::f64::consts::FRAC_PI_2)], &layer).unwrap().values()[0];
    assert_relative_eq!(score, std::f64::consts::PI, epsilon = 1e-12);
    let doubled = LieMlrLayer::new(vec![vec![RotationMatrix::identity(3)]], vec![vec![a.scale(2.0)]]).unwrap();
    let s2 = lie_mlr_logits(&[rot_z(std::f64::consts::FRAC_PI_2)], &doubled).unwrap().values()[0];
    assert_relative_eq!(s2, 2.0 * score, epsilon = 1e-12);
    assert!(LieMlrLayer::new(vec![vec![RotationMatrix::identity(3)]], vec![vec![SkewMatrix::zeros(3)]]).is_err());
}

#[test]
fn lie_paths_are_identical() {
    let mut r = rng(9);
    let layer = LieMlrLayer::new(
        (0..4).map(|_| (0..2).map(|_| sample::rotation3_bounded(&mut r, 2.0)).collect()).collect(),
        (0..4).map(|_| (0..2).map(|_| sample::skew(&mut r, 3, 1.0)).collect()).collect(),
    )
    .unwrap();
    for _ in 0..10 {
        let s: Vec<_> = (0..2).map(|_| sample::rotation3_bounded(&mut r, 1.0)).collect();
        let pt = lie_mlr_logits_via(&s, &layer, LieMove::Transport).unwrap();
        let lt = lie_mlr_logits_via(&s, &layer, LieMove::Translation).unwrap();
        assert_eq!(pt, lt);
        for (k, pk) in layer.points().iter().enumerate() {
            assert!(lie_mlr_logits(pk, &layer).unwrap().values()[k].abs() <= 1e-12);
        }
    }
    // ambient moves agree exactly at arbitrary origins
    let p = sample::rotation(&mut r, 3);
    let q = sample::rotation(&mut r, 3);
    let h = &*q * &*sample::skew(&mut r, 3, 1.0);
    assert_eq!(lie_move(LieMove::Transport, &p, &q, &h), lie_move(LieMove::Translation, &p, &q, &h));
}

#[test]
fn lie_score_is_the_log_pairing() {
    let mut r = rng(10);
    let p = sample::rotation3_bounded(&mut r, 2.0);
    let w = [0.3, -0.4, 0.5];
    let s = p.compose(&so3_exp(&hat(&w)));
    let a = sample::skew(&mut r, 3, 1.0);
    let layer = LieMlrLayer::new(vec![vec![p]], vec![vec![a.clone()]]).unwrap();
    let got = lie_mlr_logits(&[s], &layer).unwrap().values()[0];
    assert_relative_eq!(got, frob_inner(&hat(&w), &a), epsilon = 1e-12);
}

#[test]
fn logeig_examples() {
    let mut r = rng(11);
    let layer = LogEigLayer::init(3, 4, &mut r).unwrap();
    let z = logeig_logits(&SpdMatrix::identity(3), &layer).unwrap();
    assert_eq!(z.values(), layer.bias());

    let zero = LogEigLayer::new(3, Mat::zeros(2, 6), vec![0.5, -1.0]).unwrap();
    let s = sample::spd(&mut r, 3, 10.0);
    assert_eq!(logeig_logits(&s, &zero).unwrap().values(), &[0.5, -1.0]);

    // diagonal weights only: coordinates 0, 3, 5 hold the diagonal for n = 3
    let mut w = Mat::zeros(1, 6);
    w[(0, 0)] = 0.5;
    w[(0, 3)] = -1.0;
    w[(0, 5)] = 2.0;
    let layer = LogEigLayer::new(3, w, vec![0.25]).unwrap();
    let got = logeig_logits(&pd(&[2.0, 3.0, 5.0]), &layer).unwrap().values()[0];
    let expected = 0.5 * 2f64.ln() - 3f64.ln() + 2.0 * 5f64.ln() + 0.25;
    assert_relative_eq!(got, expected, epsilon = 1e-14);
}

#[test]
fn sym_vec_is_an_isometry() {
    let mut r = rng(12);
    let a = sample::symmetric(&mut r, 4, 1.0);
    let b = sample::symmetric(&mut r, 4, 1.0);
    let (va, vb) = (sym_vec(&a), sym_vec(&b));
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    assert_relative_eq!(dot, frob_inner(&a, &b), epsilon = 1e-13);
    assert_relative_eq!(frob_inner(&sym_vec_adjoint(&va, 4), &b), dot, epsilon = 1e-13);
}

#[test]
fn softmax_xent_examples() {
    let (l, g) = softmax_xent(&Logits::new(vec![0.0; 3]).unwrap(), 1).unwrap();
    assert_relative_eq!(l, 3f64.ln(), epsilon = 1e-15);
    assert_relative_eq!(g[1], 1.0 / 3.0 - 1.0, epsilon = 1e-15);
    let (l, g) = softmax_xent(&Logits::new(vec![7.0]).unwrap(), 0).unwrap();
    assert_eq!((l, g[0]), (0.0, 0.0));
    let (l, _) = softmax_xent(&Logits::new(vec![2.0, 0.0, 0.0]).unwrap(), 0).unwrap();
    assert_relative_eq!(l, (2f64.exp() + 2.0).ln() - 2.0, epsilon = 1e-15);
    let (l, _) = softmax_xent(&Logits::new(vec![1000.0, -1000.0]).unwrap(), 1).unwrap();
    assert_relative_eq!(l, 2000.0, epsilon = 1e-9);
    assert!(matches!(softmax_xent(&Logits::new(vec![0.0]).unwrap(), 1), Err(Error::Label { .. })));
    assert!(Logits::new(vec![f64::NAN]).is_err());
}

#[test]
fn layer_validation() {
    let mp = MetricParams::aim_std();
    assert!(matches!(
        SpdMlrLayer::new(mp, vec![SpdMatrix::identity(2)], vec![SymmetricMatrix::zeros(2)]),
        Err(Error::DegenerateHyperplane)
    ));
    assert!(SpdMlrLayer::new(mp, vec![SpdMatrix::identity(2)], vec![]).is_err());
    assert!(SpdMlrLayer::new(mp, vec![SpdMatrix::identity(2)], vec![SymmetricMatrix::identity(3)]).is_err());
    let mut r = rng(13);
    let layer = SpdMlrLayer::init(MetricParams::lcm(0.5).unwrap(), 4, 3, &mut r).unwrap();
    assert!(layer.points().iter().all(|p| p.as_mat() == &Mat::identity(4, 4)));
    let z = spd_mlr_logits(&SpdMatrix::identity(4), &layer).unwrap();
    assert!(z.values().iter().all(|&v| v.abs() <= 1e-12));
}
