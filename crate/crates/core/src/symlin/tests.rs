use approx::assert_abs_diff_eq;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::sample;

fn m(n: usize, d: &[f64]) -> Mat {
    Mat::from_row_slice(n, n, d)
}

fn s(n: usize, d: &[f64]) -> SymmetricMatrix {
    SymmetricMatrix::from_row_slice(n, d).unwrap()
}

fn p(n: usize, d: &[f64]) -> SpdMatrix {
    SpdMatrix::from_row_slice(n, d).unwrap()
}

fn assert_mat_eq(a: &Mat, b: &Mat, tol: f64) {
    let err = frob_norm(&(a - b));
    assert!(err <= tol, "‖a-b‖ = {err:e} > {tol:e}\na = {a}\nb = {b}");
}

/// Central difference of a matrix-valued map along `v`.
fn fd_dir(f: impl Fn(&Mat) -> Mat, x: &Mat, v: &Mat, h: f64) -> Mat {
    (f(&(x + v * h)) - f(&(x - v * h))) / (2.0 * h)
}

fn funcm_raw(x: &Mat, f: MatFn) -> Mat {
    funcm(&SymmetricMatrix::symmetrize(x), f).unwrap().into_inner()
}

#[test]
fn eig_of_diagonal_and_identity() {
    let e = eig_sym(&SymmetricMatrix::from_diagonal(&[3.0, 1.0])).unwrap();
    assert_eq!(e.sigma.as_slice(), &[3.0, 1.0]);
    assert_mat_eq(&e.u.abs(), &Mat::identity(2, 2), 1e-15);

    let e = eig_sym(&SymmetricMatrix::identity(4)).unwrap();
    assert_eq!(e.sigma.as_slice(), &[1.0, 1.0, 1.0, 1.0]);
}

#[test]
fn eig_of_two_by_two() {
    let a = s(2, &[2.0, 1.0, 1.0, 2.0]);
    let e = eig_sym(&a).unwrap();
    assert_abs_diff_eq!(e.sigma[0], 3.0, epsilon = 1e-14);
    assert_abs_diff_eq!(e.sigma[1], 1.0, epsilon = 1e-14);
    let r = 0.5f64.sqrt();
    // columns up to sign
    assert_abs_diff_eq!(e.u[(0, 0)].abs(), r, epsilon = 1e-14);
    assert_abs_diff_eq!((e.u[(0, 0)] * e.u[(1, 0)]), 0.5, epsilon = 1e-14);
    assert_abs_diff_eq!((e.u[(0, 1)] * e.u[(1, 1)]), -0.5, epsilon = 1e-14);
    assert!(rel_err(&e.reconstruct(), &a) < 1e-14);
}

#[test]
fn eig_orthogonality_and_ordering() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 2..9 {
        let a = sample::symmetric(&mut rng, n, 1.0);
        let e = eig_sym(&a).unwrap();
        assert!(rel_err(&e.reconstruct(), &a) < 1e-10);
        assert_mat_eq(&(e.u.transpose() * &e.u), &Mat::identity(n, n), 1e-10);
        assert!(e.sigma.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn funcm_examples() {
    let z = funcm(&SymmetricMatrix::identity(3), MatFn::Log).unwrap();
    assert_mat_eq(&z, &Mat::zeros(3, 3), 1e-15);

    let r = funcm(&SymmetricMatrix::from_diagonal(&[4.0, 9.0]), MatFn::Sqrt).unwrap();
    assert_mat_eq(&r, &m(2, &[2.0, 0.0, 0.0, 3.0]), 1e-14);

    // direct multiplication oracle: A·A
    let a = m(2, &[2.0, 1.0, 1.0, 2.0]);
    let sq = funcm(&s(2, a.as_slice()), MatFn::Pow(2.0)).unwrap();
    assert_mat_eq(&sq, &(&a * &a), 1e-13);
    assert_mat_eq(&sq, &m(2, &[5.0, 4.0, 4.0, 5.0]), 1e-13);
}

#[test]
fn funcm_rejects_non_spd_log() {
    let err = funcm(&SymmetricMatrix::from_diagonal(&[1.0, -2.0]), MatFn::Log).unwrap_err();
    match err {
        crate::Error::NotPositiveDefinite { eigenvalue, .. } => assert_eq!(eigenvalue, -2.0),
        other => panic!("unexpected {other:?}"),
    }
    // integer powers are fine on indefinite input
    assert!(funcm(&SymmetricMatrix::from_diagonal(&[1.0, -2.0]), MatFn::Pow(3.0)).is_ok());
    assert!(funcm(&SymmetricMatrix::from_diagonal(&[1.0, -2.0]), MatFn::Pow(0.5)).is_err());
}

#[test]
fn funcm_diff_examples() {
    let v = s(2, &[0.3, -1.0, -1.0, 2.0]);
    let d = funcm_diff(&SpdMatrix::identity(2), MatFn::Log, &v).unwrap();
    assert_mat_eq(&d, &v, 1e-15);

    // oracle: central difference of the matrix log at diag(1, e)
    let e1 = std::f64::consts::E;
    let base = m(2, &[1.0, 0.0, 0.0, e1]);
    let dir = m(2, &[0.0, 1.0, 1.0, 0.0]);
    let fd = fd_dir(|x| funcm_raw(x, MatFn::Log), &base, &dir, 1e-6);
    let c = 1.0 / (e1 - 1.0);
    assert_abs_diff_eq!(fd[(0, 1)], c, epsilon = 1e-8);
    let d = funcm_diff(&p(2, base.as_slice()), MatFn::Log, &s(2, dir.as_slice())).unwrap();
    assert_mat_eq(&d, &m(2, &[0.0, c, c, 0.0]), 1e-14);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pp = sample::spd(&mut rng, 4, 50.0);
    let v = sample::symmetric(&mut rng, 4, 1.0);
    let d = funcm_diff(&pp, MatFn::Pow(1.0), &v).unwrap();
    assert_mat_eq(&d, &v, 1e-13);
}

#[test]
fn funcm_diff_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for f in [MatFn::Log, MatFn::Exp, MatFn::Pow(0.5), MatFn::Pow(-0.7), MatFn::Sqrt] {
        for n in 2..7 {
            let pp = sample::spd(&mut rng, n, 20.0);
            let v = sample::symmetric(&mut rng, n, 1.0);
            let fd = fd_dir(|x| funcm_raw(x, f), &pp, &v, 1e-6);
            let an = funcm_diff(&pp, f, &v).unwrap();
            assert!(rel_err(&an, &fd) < 1e-5, "{f:?} n={n}: {}", rel_err(&an, &fd));
        }
    }
}

#[test]
fn funcm_diff_near_degenerate_spectrum() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for gap in [1e-7, 1e-9, 1e-12, 0.0] {
        for f in [MatFn::Log, MatFn::Exp, MatFn::Pow(0.5)] {
            let pp = sample::spd_with_spectrum(&mut rng, &[2.0, 1.0 + gap, 1.0, 0.5]);
            let v = sample::symmetric(&mut rng, 4, 1.0);
            let an = funcm_diff(&pp, f, &v).unwrap();
            assert!(an.iter().all(|x| x.is_finite()));
            let fd = fd_dir(|x| funcm_raw(x, f), &pp, &v, 1e-5);
            assert!(rel_err(&an, &fd) < 1e-5, "{f:?} gap={gap}: {}", rel_err(&an, &fd));
        }
    }
}

#[test]
fn log_exp_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..100 {
        let n = 2 + i % 7;
        let pp = sample::spd(&mut rng, n, 1e4);
        let l = funcm(&pp.to_symmetric(), MatFn::Log).unwrap();
        let back = funcm(&l, MatFn::Exp).unwrap();
        assert!(rel_err(&back, &pp) < 1e-8);

        let x = sample::symmetric(&mut rng, n, 1.0);
        let back = funcm(&funcm(&x, MatFn::Exp).unwrap(), MatFn::Log).unwrap();
        assert!(rel_err(&back, &x) < 1e-8);
    }
}

#[test]
fn power_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for theta in [0.25, -0.25, 0.5, -0.5, 1.0, 1.5] {
        for n in 2..7 {
            let pp = sample::spd(&mut rng, n, 100.0);
            let a = funcm(&pp.to_symmetric(), MatFn::Pow(theta)).unwrap();
            let b = funcm(&a, MatFn::Pow(1.0 / theta)).unwrap();
            assert!(rel_err(&b, &pp) < 1e-8, "theta={theta}");
        }
    }
}

#[test]
fn cholesky_examples() {
    assert_mat_eq(&chol(&SpdMatrix::identity(3)).unwrap(), &Mat::identity(3, 3), 0.0);
    assert_mat_eq(&chol(&SpdMatrix::from_diagonal(&[4.0, 9.0]).unwrap()).unwrap(), &m(2, &[2.0, 0.0, 0.0, 3.0]), 0.0);
    let pp = p(2, &[4.0, 2.0, 2.0, 5.0]);
    let l = chol(&pp).unwrap();
    assert_mat_eq(&l, &m(2, &[2.0, 0.0, 1.0, 2.0]), 1e-15);
    assert_mat_eq(&(&*l * l.transpose()), &pp, 1e-14);
}

#[test]
fn cholesky_pivot_error() {
    let err = chol_mat(&m(2, &[1.0, 2.0, 2.0, 1.0])).unwrap_err();
    assert!(matches!(err, crate::Error::CholeskyPivot { index: 1, .. }));
}

#[test]
fn chol_diff_examples() {
    let d = chol_diff(&SpdMatrix::identity(3), &SymmetricMatrix::identity(3).scale(2.0)).unwrap();
    assert_mat_eq(&d, &Mat::identity(3, 3), 1e-15);

    let pp = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
    let v = SymmetricMatrix::from_diagonal(&[8.0, 0.0]);
    let d = chol_diff(&pp, &v).unwrap();
    assert_mat_eq(&d, &m(2, &[2.0, 0.0, 0.0, 0.0]), 1e-15);
    // defining identity Ṽ Lᵀ + L Ṽᵀ = V
    let l = chol(&pp).unwrap();
    let recon = &*d * l.transpose() + &*l * d.transpose();
    assert_mat_eq(&recon, &v, 1e-14);

    let z = chol_diff(&pp, &SymmetricMatrix::zeros(2)).unwrap();
    assert_mat_eq(&z, &Mat::zeros(2, 2), 0.0);
}

#[test]
fn chol_diff_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 2..7 {
        let pp = sample::spd(&mut rng, n, 30.0);
        let v = sample::symmetric(&mut rng, n, 1.0);
        let fd = fd_dir(|x| chol_mat(x).unwrap(), &pp, &v, 1e-6);
        let an = chol_diff(&pp, &v).unwrap();
        assert!(rel_err(&an, &fd) < 1e-6);
    }
}

#[test]
fn chol_inv_diff_examples_and_round_trip() {
    let i = LowerTriangular::new(Mat::identity(2, 2)).unwrap();
    assert_mat_eq(&chol_inv_diff(&i, &i).unwrap(), &(Mat::identity(2, 2) * 2.0), 0.0);
    let e21 = LowerTriangular::new(m(2, &[0.0, 0.0, 1.0, 0.0])).unwrap();
    assert_mat_eq(&chol_inv_diff(&i, &e21).unwrap(), &m(2, &[0.0, 1.0, 1.0, 0.0]), 0.0);

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let pp = sample::spd(&mut rng, 4, 100.0);
        let v = sample::symmetric(&mut rng, 4, 1.0);
        let l = chol(&pp).unwrap();
        let x = chol_diff(&pp, &v).unwrap();
        let back = chol_inv_diff(&l, &x).unwrap();
        assert_mat_eq(&back, &v, 1e-9);
        // and the other composition on lower-triangular inputs
        let y = LowerTriangular::new(lower(&sample::gaussian(&mut rng, 4, 4))).unwrap();
        let vv = chol_inv_diff(&l, &y).unwrap();
        let yy = chol_diff(&pp, &vv).unwrap();
        assert_mat_eq(&yy, &y, 1e-9);
    }
}

#[test]
fn lyapunov_examples() {
    let v = s(2, &[1.0, 2.0, 2.0, -3.0]);
    assert_mat_eq(&lyap_solve(&SpdMatrix::identity(2), &v).unwrap(), &(&*v * 0.5), 1e-15);

    let pp = SpdMatrix::from_diagonal(&[1.0, 3.0]).unwrap();
    let ones = s(2, &[1.0; 4]);
    let x = lyap_solve(&pp, &ones).unwrap();
    let expect = m(2, &[0.5, 0.25, 0.25, 1.0 / 6.0]);
    assert_mat_eq(&x, &expect, 1e-15);
    let resid = &*x * &*pp + &*pp * &*x - &*ones;
    assert!(frob_norm(&resid) < 1e-15);

    assert_mat_eq(&lyap_solve(&pp, &SymmetricMatrix::zeros(2)).unwrap(), &Mat::zeros(2, 2), 0.0);
}

#[test]
fn lyapunov_residual_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..50 {
        let n = 2 + i % 7;
        let pp = sample::spd(&mut rng, n, 1e4);
        let v = sample::symmetric(&mut rng, n, 3.0);
        let x = lyap_solve(&pp, &v).unwrap();
        let resid = frob_norm(&(&*x * &*pp + &*pp * &*x - &*v));
        assert!(resid < 1e-10 * (1.0 + frob_norm(&v)), "resid {resid:e}");
    }
}

#[test]
fn lyap_vjp_trivial_cases() {
    let v = s(2, &[1.0, 2.0, 2.0, -3.0]);
    let g = s(2, &[0.5, -1.0, -1.0, 4.0]);
    let id = SpdMatrix::identity(2);
    let x = lyap_solve(&id, &v).unwrap();
    let (dv, _) = lyap_vjp(&id, &x, &g).unwrap();
    assert_mat_eq(&dv, &(&*g * 0.5), 1e-15);

    let (_, dp) = lyap_vjp(&id, &x, &SymmetricMatrix::identity(2)).unwrap();
    assert_mat_eq(&dp, &(&*v * -0.5), 1e-15);
}

#[test]
fn lyap_vjp_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let h = 1e-6;
    let solve = |pm: &Mat, vm: &Mat| eig_mat(pm).unwrap().lyap(vm);
    for _ in 0..10 {
        let n = 5;
        let pp = sample::spd(&mut rng, n, 50.0);
        let v = sample::symmetric(&mut rng, n, 1.0);
        let g = sample::symmetric(&mut rng, n, 1.0);
        let x = lyap_solve(&pp, &v).unwrap();
        let (dv, dp) = lyap_vjp(&pp, &x, &g).unwrap();
        let dir_v = sample::symmetric(&mut rng, n, 1.0);
        let dir_p = sample::symmetric(&mut rng, n, 1.0);
        let fd_v = frob_inner(&g, &fd_dir(|vm| solve(&pp, vm), &v, &dir_v, h));
        let fd_p = frob_inner(&g, &fd_dir(|pm| solve(pm, &v), &pp, &dir_p, h));
        let an_v = frob_inner(&dv, &dir_v);
        let an_p = frob_inner(&dp, &dir_p);
        assert!((an_v - fd_v).abs() <= 1e-5 * fd_v.abs().max(1e-3));
        assert!((an_p - fd_p).abs() <= 1e-5 * fd_p.abs().max(1e-3));
    }
}

#[test]
fn prod_sqrt_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = sample::spd(&mut rng, 3, 10.0);
    let (ba, ab) = prod_sqrt(&SpdMatrix::identity(3), &a).unwrap();
    let ra = funcm(&a.to_symmetric(), MatFn::Sqrt).unwrap();
    assert_mat_eq(&ba, &ra, 1e-13);
    assert_mat_eq(&ab, &ra, 1e-13);

    let b = SpdMatrix::from_diagonal(&[4.0, 1.0]).unwrap();
    let a = SpdMatrix::from_diagonal(&[9.0, 1.0]).unwrap();
    let (ba, ab) = prod_sqrt(&b, &a).unwrap();
    assert_mat_eq(&ba, &m(2, &[6.0, 0.0, 0.0, 1.0]), 1e-14);
    assert_mat_eq(&ab, &m(2, &[6.0, 0.0, 0.0, 1.0]), 1e-14);
}

#[test]
fn prod_sqrt_squares_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in [2, 3, 4, 6] {
        for _ in 0..5 {
            let a = sample::spd(&mut rng, n, 100.0);
            let b = sample::spd(&mut rng, n, 100.0);
            let (ba, ab) = prod_sqrt(&b, &a).unwrap();
            assert!(rel_err(&(&ba * &ba), &(&*b * &*a)) < 1e-8);
            assert!(rel_err(&(&ab * &ab), &(&*a * &*b)) < 1e-8);
            assert_eq!(ab, ba.transpose());
        }
    }
}

#[test]
fn spd_project_examples() {
    let id = spd_project(&Mat::identity(3, 3), 1e-8).unwrap();
    assert_mat_eq(&id, &Mat::identity(3, 3), 1e-15);

    let c = spd_project(&m(2, &[1.0, 0.0, 0.0, -1.0]), 1e-8).unwrap();
    assert_mat_eq(&c, &m(2, &[1.0, 0.0, 0.0, 1e-8]), 1e-15);

    // symmetrize to [[1,1],[1,1]], eigenvalues (2, 0) → (2, 1e-8)
    let c = spd_project(&m(2, &[1.0, 2.0, 0.0, 1.0]), 1e-8).unwrap();
    let e = eig_sym(&c.to_symmetric()).unwrap();
    assert_abs_diff_eq!(e.sigma[0], 2.0, epsilon = 1e-14);
    assert_abs_diff_eq!(e.sigma[1], 1e-8, epsilon = 1e-14);
    let r = 0.5f64.sqrt();
    let oracle = m(2, &[r, r, r, -r]) * m(2, &[2.0, 0.0, 0.0, 1e-8]) * m(2, &[r, r, r, -r]);
    assert_mat_eq(&c, &oracle, 1e-14);
}

#[test]
fn constructors_validate() {
    assert!(matches!(SymmetricMatrix::new(m(2, &[1.0, 2.0, 0.0, 1.0])), Err(crate::Error::NotSymmetric { .. })));
    assert!(matches!(SpdMatrix::new(m(2, &[1.0, 0.0, 0.0, -1.0])), Err(crate::Error::NotPositiveDefinite { .. })));
    assert!(matches!(SymmetricMatrix::new(m(2, &[1.0, f64::NAN, f64::NAN, 1.0])), Err(crate::Error::NonFinite)));
    assert!(LowerTriangular::new(m(2, &[1.0, 1.0, 0.0, 1.0])).is_err());
}

mod props {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::*;
    use crate::sample;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn chol_diff_inverts_chol_inv_diff(seed in any::<u64>(), n in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pp = sample::spd(&mut rng, n, 1e3);
            let v = sample::symmetric(&mut rng, n, 1.0);
            let l = chol(&pp).unwrap();
            let back = chol_inv_diff(&l, &chol_diff(&pp, &v).unwrap()).unwrap();
            prop_assert!(frob_norm(&(&*back - &*v)) < 1e-9);
        }

        #[test]
        fn lyap_is_self_adjoint(seed in any::<u64>(), n in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pp = sample::spd(&mut rng, n, 1e3);
            let v = sample::symmetric(&mut rng, n, 1.0);
            let w = sample::symmetric(&mut rng, n, 1.0);
            let lv = lyap_solve(&pp, &v).unwrap();
            let lw = lyap_solve(&pp, &w).unwrap();
            prop_assert!((frob_inner(&lv, &w) - frob_inner(&v, &lw)).abs() < 1e-10);
        }
    }
}
