mod common;

use halfweight::hecke::{self, Family};
use halfweight::qexp::{self, QExpansion};
use halfweight::space::CuspSpace;
use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;

fn rel_close(x: &[Complex64], y: &[Complex64], tol: f64) -> bool {
    x.iter().zip(y).all(|(a, b)| (a - b).norm() <= tol * b.norm().max(1.0))
}

#[test]
fn zero_form_maps_to_zero() {
    let z = QExpansion::zero(13, 4, 20_000);
    let t = hecke::t_p2_coeff(&z, 3, 6).unwrap();
    assert!(t.to_complex().iter().all(|c| c.norm() == 0.0));
    let t = hecke::t_p2_coset(&z.as_numeric(), 3, 6, 30, false).unwrap();
    assert!(t.expansion.to_complex().iter().all(|c| c.norm() == 0.0));
    assert!(hecke::u4(&z).to_complex().iter().all(|c| c.norm() == 0.0));
    let w = hecke::w4(&z.as_numeric(), 50, false).unwrap();
    assert!(w.expansion.to_complex().iter().all(|c| c.norm() == 0.0));
}

#[test]
fn bad_primes_are_rejected() {
    let t = qexp::theta(100);
    assert!(hecke::t_p2_coeff(&t, 2, 6).is_err());
    assert!(hecke::t_p2_coeff(&t, 9, 6).is_err());
    assert!(hecke::t_p2_coset(&t, 2, 6, 10, false).is_err());
}

#[test]
fn coset_definition_matches_coefficient_formula() {
    let space = common::space();
    for p in [3u64, 5] {
        for a in 1..=space.dim() {
            let b = space.basis_expansion(a);
            let coeff = hecke::t_p2_coeff(&b, p, space.ell).unwrap().truncate(40).to_complex();
            let coset = hecke::t_p2_coset(&b, p, space.ell, 40, true).unwrap().expansion.to_complex();
            assert!(rel_close(&coset, &coeff, 1e-6), "p = {p}, basis {a}");
        }
    }
}

#[test]
fn coset_operator_is_linear() {
    let space = common::space();
    let f1 = space.basis_expansion(1).as_numeric();
    let f2 = space.basis_expansion(2).as_numeric().scale(Complex64::new(0.5, -2.0));
    let sum = f1.add(&f2).unwrap();
    let t = |f: &QExpansion| hecke::t_p2_coset(f, 3, 6, 30, true).unwrap().expansion.to_complex();
    let (a, b, s) = (t(&f1), t(&f2), t(&sum));
    for n in 0..=30 {
        let want = a[n] + b[n];
        assert!((s[n] - want).norm() <= 1e-8 * want.norm().max(1.0), "n = {n}");
    }
}

#[test]
fn eigenform_residuals() {
    let b = common::bundle();
    for p in [3u64, 5, 7] {
        let f = b.expansion(Family::F);
        let t = hecke::t_p2_coeff(&f, p, b.ell).unwrap().to_complex();
        let eig = b.hecke_eigenvalue(p).unwrap();
        let want: Vec<Complex64> = f.to_complex()[..t.len()].iter().map(|z| z * eig).collect();
        assert!(hecke::residual(&t, &want) < 1e-8, "p = {p}");
        let r = hecke::companion_residuals(b, p).unwrap();
        assert!(r.max_residual() < 1e-6 && r.max_eigen_mismatch() < 1e-6, "{r:?}");
    }
    for (&p, &w) in &b.omega {
        assert!(w.abs() <= 2.0, "|ω_{p}| = {w}");
    }
}

#[test]
fn eigenvalues_stable_under_longer_truncation() {
    let a = hecke::extract_eigenform(6, &[3, 5, 7], 2_000, true).unwrap();
    let b = hecke::extract_eigenform(6, &[3, 5, 7], 4_000, true).unwrap();
    for p in [3u64, 5, 7] {
        assert!((a.omega[&p] - b.omega[&p]).abs() < 1e-9, "p = {p}");
    }
    assert!((a.c4 - b.c4).norm() < 1e-9);
}

#[test]
fn theta_u4_and_g_annihilated() {
    let t = hecke::u4(&qexp::theta(400));
    assert_eq!(t.coeff(1), Complex64::new(2.0, 0.0));
    let b = common::bundle();
    let g = b.unnormalized(Family::G);
    let scale = g[..=400].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let gu = hecke::u4(&b.expansion(Family::G));
    for n in 1..=100 {
        assert!(gu.coeff(n).norm() <= 1e-7 * scale, "n = {n}");
    }
}

#[test]
fn operator_matrices_commute_and_w4_is_an_involution() {
    let space = CuspSpace::new(6, 2_000, false).unwrap();
    let t3 = hecke::hecke_matrix(&space, 3).unwrap();
    let t5 = hecke::hecke_matrix(&space, 5).unwrap();
    let u = hecke::u4_matrix(&space).unwrap();
    assert_eq!(hecke::qmat_mul(&t3, &t5), hecke::qmat_mul(&t5, &t3));
    assert_eq!(hecke::qmat_mul(&t5, &u), hecke::qmat_mul(&u, &t5));
    let w = hecke::w4_matrix(&space);
    let ww = hecke::qmat_mul(&w, &w);
    for (i, row) in ww.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            let want = if i == j { Ratio::from_integer(1) } else { Ratio::from_integer(0) };
            assert_eq!(*x, want);
        }
    }
}

#[test]
fn p2_identities() {
    let b = common::bundle();
    assert_eq!(b.niwa_mu, -32);
    assert_eq!(hecke::niwa_mu(6), -32);
    let mu = b.niwa_mu as f64;
    let kap = 4f64.powf(b.kappa());
    let ch = Complex64::new(2.0 * mu * mu, 0.0) / b.c4;
    let scale = b.lambda_f[..=400].iter().map(|z| z.norm()).fold(0.0, f64::max);
    for n in 1..=100 {
        let r = b.lambda_h[4 * n] * kap - b.lambda_f[n] * mu - b.lambda_h[n] * ch;
        assert!(r.norm() < 1e-6 * scale.max(1.0), "n = {n}: {r}");
    }
    let rep = hecke::verify_niwa(common::space(), b, true).unwrap();
    assert_eq!(rep.quartic_exact, 0.0);
    assert!(rep.passes(1e-6), "{rep:?}");
    assert_eq!(rep.case, 1);
}

#[test]
fn json_bundle_roundtrip() {
    let b = common::bundle().truncated(500);
    let back = hecke::EigenformBundle::from_json(&b.to_json().unwrap()).unwrap();
    assert_eq!(back.lambda_f, b.lambda_f);
    assert_eq!(back.omega, b.omega);
    assert_eq!(back.c4, b.c4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coefficient_operators_are_linear(a in prop::collection::vec(-1000i64..1000, 200..=200),
                                        b in prop::collection::vec(-1000i64..1000, 200..=200),
                                        p in prop::sample::select(vec![3u64, 5, 7])) {
        let ea = QExpansion::exact(13, 4, a.iter().map(|&x| x as i128).collect(), 1);
        let eb = QExpansion::exact(13, 4, b.iter().map(|&x| x as i128).collect(), 1);
        let sum = ea.add(&eb).unwrap();
        let lhs = hecke::t_p2_coeff(&sum, p, 6).unwrap();
        let rhs = hecke::t_p2_coeff(&ea, p, 6).unwrap().add(&hecke::t_p2_coeff(&eb, p, 6).unwrap()).unwrap();
        prop_assert_eq!(lhs.to_complex(), rhs.to_complex());
        let u = hecke::u4(&ea);
        for n in 0..=u.n_max() {
            prop_assert_eq!(u.coeff(n), ea.coeff(4 * n));
        }
    }
}
