mod common;

use std::f64::consts::PI;

use halfweight::hecke::{self, Family};
use halfweight::qexp::{self, QExpansion};
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn int_series(coeffs: &[i64], n_max: usize) -> QExpansion {
    let mut num = vec![0i128; n_max + 1];
    for (i, &x) in coeffs.iter().enumerate().take(n_max + 1) {
        num[i] = x as i128;
    }
    QExpansion::exact(0, 1, num, 1)
}

#[test]
fn generator_coefficients() {
    let th = qexp::theta(50);
    assert_eq!(th.coeff(4), c(2.0, 0.0));
    assert_eq!(th.coeff(0), c(1.0, 0.0));
    assert_eq!(th.coeff(3), c(0.0, 0.0));
    let f = qexp::eis_f(50);
    assert_eq!(f.coeff(3), c(4.0, 0.0));
    assert_eq!(f.coeff(2), c(0.0, 0.0));
    assert_eq!(th.mul(&qexp::one(50)).unwrap().to_complex(), th.to_complex());
    assert_eq!(th.pow(2).unwrap().coeff(1), c(4.0, 0.0));
    assert_eq!(th.pow(4).unwrap().coeff(1), c(8.0, 0.0));
}

#[test]
fn theta_powers_count_representations() {
    let n_max = 200usize;
    let th2 = qexp::theta(n_max).pow(2).unwrap();
    let th4 = qexp::theta(n_max).pow(4).unwrap();
    let r = 15i64;
    for n in 0..=n_max as i64 {
        let mut r2 = 0;
        let mut r4 = 0;
        for a in -r..=r {
            for b in -r..=r {
                let ab = a * a + b * b;
                if ab == n {
                    r2 += 1;
                }
                for cc in -r..=r {
                    let rest = n - ab - cc * cc;
                    if rest >= 0 {
                        let d = (rest as f64).sqrt().round() as i64;
                        if d * d == rest {
                            r4 += if d == 0 { 1 } else { 2 };
                        }
                    }
                }
            }
        }
        assert_eq!(th2.coeff(n as usize).re, r2 as f64, "r2({n})");
        assert_eq!(th4.coeff(n as usize).re, r4 as f64, "r4({n})");
    }
}

#[test]
fn theta_at_i_against_direct_sum() {
    let th = qexp::theta(400);
    let v = th.evaluate(c(0.0, 1.0), 1e-14).unwrap();
    let direct: f64 = (-20i64..=20).map(|n| (-PI * (n * n) as f64 * 2.0).exp()).sum();
    assert!((v.value - c(direct, 0.0)).norm() < 1e-15);
    let z = qexp::QExpansion::zero(1, 4, 100).evaluate(c(0.3, 0.5), 1e-12).unwrap();
    assert_eq!(z.value, c(0.0, 0.0));
}

#[test]
fn evaluation_is_multiplicative_on_theta() {
    let th = qexp::theta(400);
    let th4 = th.pow(4).unwrap();
    for z in [c(0.0, 1.0), c(0.17, 0.4), c(-0.3, 0.25)] {
        let a = th.evaluate(z, 1e-14).unwrap().value.powi(4);
        let b = th4.evaluate(z, 1e-14).unwrap().value;
        assert!((a - b).norm() < 1e-12 * b.norm().max(1.0), "z = {z}");
    }
}

#[test]
fn evaluation_below_height_budget_fails() {
    let th = qexp::theta(100);
    assert!(th.evaluate(c(0.0, 1e-4), 1e-10).is_err());
    assert!(th.evaluate(c(0.0, -1.0), 1e-10).is_err());
}

#[test]
fn fft_single_and_two_modes() {
    let one_mode = qexp::fft_invert(|z| Ok((2.0 * PI * Complex64::i() * z).exp()), 64, 0.1, 10, 0.0, false).unwrap();
    for n in 0..=10 {
        let want = if n == 1 { 1.0 } else { 0.0 };
        assert!((one_mode.expansion.coeff(n) - c(want, 0.0)).norm() < 1e-10, "n = {n}");
    }
    let two = qexp::fft_invert(
        |z| Ok((4.0 * PI * Complex64::i() * z).exp() + 3.0 * (10.0 * PI * Complex64::i() * z).exp()),
        64,
        0.1,
        10,
        -0.5,
        false,
    )
    .unwrap();
    for n in 0..=10 {
        let want = match n {
            2 => 1.0,
            5 => 3.0,
            _ => 0.0,
        };
        assert!((two.expansion.coeff(n) - c(want, 0.0)).norm() < 1e-10, "n = {n}");
    }
    assert!(qexp::fft_invert(|_| Ok(c(0.0, 0.0)), 100, 0.1, 10, 0.0, false).is_err());
}

#[test]
fn fft_recovers_theta_fourth_power() {
    let th4 = qexp::theta(4000).pow(4).unwrap();
    let coeffs = th4.to_complex();
    let n_out = 100;
    let y = qexp::auto_height(n_out, 4);
    let m = qexp::auto_samples(n_out, y);
    let inv = qexp::fft_invert(|z| Ok(qexp::eval_series(&coeffs, 0.0, z)), m, y, n_out, 0.0, false).unwrap();
    for n in 0..=n_out {
        assert!((inv.expansion.coeff(n) - coeffs[n]).norm() < 1e-8, "n = {n}");
    }
}

#[test]
fn theta_is_fixed_by_w4() {
    let th = qexp::theta(20_000);
    let inv = hecke::w4(&th, 100, false).unwrap();
    for n in 0..=100 {
        assert!((inv.expansion.coeff(n) - th.coeff(n)).norm() < 1e-8, "n = {n}");
    }
}

/// W₄ recovered in octaves: index n comes from the pass whose n_out is the
/// first power-of-two multiple of 64 above n, so small indices keep their
/// own roundoff scale.
fn w4_by_octaves(f: &QExpansion, n_out: usize) -> QExpansion {
    let mut out = vec![Complex64::default(); n_out + 1];
    let mut lo = 0;
    let mut top = 64;
    while lo <= n_out {
        let hi = top.min(n_out);
        let pass = hecke::w4(f, hi, true).unwrap().expansion;
        for (n, slot) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *slot = pass.coeff(n);
        }
        lo = hi + 1;
        top *= 2;
    }
    QExpansion::numeric(f.half_weight_numerator, 4, out)
}

#[test]
fn w4_is_an_involution_on_the_eigenform() {
    let b = common::bundle();
    let f = b.expansion(Family::F);
    let once = w4_by_octaves(&f, 2_048);
    let h = b.unnormalized(Family::H);
    for n in 1..=2_048 {
        assert!((once.coeff(n) - h[n]).norm() < 1e-8 * h[n].norm().max(1.0), "W4 f at n = {n}");
    }
    let twice = hecke::w4(&once, 100, true).unwrap().expansion;
    let want = f.truncate(100).to_complex();
    assert!(hecke::residual(&twice.to_complex(), &want) < 1e-6);
}

#[test]
fn g_companion_support_congruence() {
    let b = common::bundle();
    let r = if b.ell % 2 == 0 { 1 } else { 3 };
    for n in 0..=200 {
        if n % 4 != r {
            assert!(b.lambda_g[n].norm() < 1e-12, "λ_g({n}) = {}", b.lambda_g[n]);
        }
    }
    assert_eq!(b.lambda_f[0], c(0.0, 0.0));
    assert_eq!(b.lambda_h[0], c(0.0, 0.0));
}

#[test]
fn rho_half_slash_period_twist() {
    // f|[ρ](z) = (1 − 2z)^{−k/2} f(z/(1 − 2z)) with the principal branch.
    let b = common::bundle();
    let k = 2 * b.ell + 1;
    let a = b.unnormalized(Family::F);
    let slash = |z: Complex64| {
        let den = c(1.0, 0.0) - 2.0 * z;
        (-(k as f64) / 2.0 * den.ln()).exp() * qexp::eval_series(&a, 0.0, z / den)
    };
    let twist = halfweight::arith::i_pow(k as i64);
    for j in 0..20 {
        let z = c(-0.45 + 0.045 * j as f64, 0.3);
        let lhs = slash(z + 1.0);
        let rhs = twist * slash(z);
        assert!((lhs - rhs).norm() < 1e-8 * rhs.norm().max(1e-300), "z = {z}");
    }
}

#[test]
fn mean_square_grows_linearly() {
    let b = common::bundle();
    for fam in [Family::F, Family::G, Family::H] {
        let lam = b.lambda(fam);
        assert_eq!(qexp::mean_square(lam, 0).unwrap(), 0.0);
        let ratio = qexp::mean_square(lam, 10_000).unwrap() / qexp::mean_square(lam, 5_000).unwrap();
        assert!((1.7..=2.3).contains(&ratio), "{fam:?}: {ratio}");
    }
    assert!(qexp::mean_square(&b.lambda_f, b.n_max + 1).is_err());
}

#[test]
fn json_roundtrip() {
    let f = qexp::eis_f(30).scale_exact(3, 7).unwrap();
    let back = QExpansion::from_json(&f.to_json(Some(6))).unwrap();
    assert_eq!(back.to_complex(), f.to_complex());
    assert!(back.is_exact());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_laws(a in prop::collection::vec(-50i64..50, 1..12),
                 b in prop::collection::vec(-50i64..50, 1..12),
                 d in prop::collection::vec(-50i64..50, 1..12)) {
        let (a, b, d) = (int_series(&a, 40), int_series(&b, 40), int_series(&d, 40));
        prop_assert_eq!(a.mul(&b).unwrap().to_complex(), b.mul(&a).unwrap().to_complex());
        prop_assert_eq!(
            a.mul(&b).unwrap().mul(&d).unwrap().to_complex(),
            a.mul(&b.mul(&d).unwrap()).unwrap().to_complex()
        );
        prop_assert_eq!(
            a.mul(&b.add(&d).unwrap()).unwrap().to_complex(),
            a.mul(&b).unwrap().add(&a.mul(&d).unwrap()).unwrap().to_complex()
        );
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism(a in prop::collection::vec(-20i64..20, 1..10),
                                         b in prop::collection::vec(-20i64..20, 1..10),
                                         x in -0.5f64..0.5, y in 0.2f64..1.0) {
        let (a, b) = (int_series(&a, 40), int_series(&b, 40));
        let z = c(x, y);
        let ea = a.evaluate(z, 1e-12).unwrap().value;
        let eb = b.evaluate(z, 1e-12).unwrap().value;
        let prod = a.mul(&b).unwrap().evaluate(z, 1e-12).unwrap().value;
        let sum = a.add(&b).unwrap().evaluate(z, 1e-12).unwrap().value;
        prop_assert!((prod - ea * eb).norm() < 1e-9 * (1.0 + prod.norm()));
        prop_assert!((sum - ea - eb).norm() < 1e-9 * (1.0 + sum.norm()));
    }

    #[test]
    fn fft_inverts_evaluation(coeffs in prop::collection::vec(-100i64..100, 1..60)) {
        let f = int_series(&coeffs, 80);
        let cf = f.to_complex();
        let y = qexp::auto_height(80, 8);
        let m = qexp::auto_samples(80, y);
        let inv = qexp::fft_invert(|z| Ok(qexp::eval_series(&cf, 0.0, z)), m, y, 80, 0.0, false).unwrap();
        for (n, want) in cf.iter().enumerate() {
            prop_assert!((inv.expansion.coeff(n) - want).norm() < 1e-8, "n = {}", n);
        }
    }
}
