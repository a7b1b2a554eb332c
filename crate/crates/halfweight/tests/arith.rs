use halfweight::arith;
use num_complex::Complex64;
use proptest::prelude::*;

fn pow_mod(mut b: i64, mut e: i64, m: i64) -> i64 {
    let mut r = 1i64;
    b = b.rem_euclid(m);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % m;
        }
        b = b * b % m;
        e >>= 1;
    }
    r
}

fn naive_is_prime(n: u64) -> bool {
    n >= 2 && (2..n).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

fn naive_moebius(n: u64) -> i32 {
    let mut m = n;
    let mut mu = 1;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            m /= p;
            if m % p == 0 {
                return 0;
            }
            mu = -mu;
        }
        p += 1;
    }
    if m > 1 {
        mu = -mu;
    }
    mu
}

#[test]
fn kronecker_small_values() {
    assert_eq!(arith::kronecker(1, 1).unwrap(), 1);
    assert_eq!(arith::kronecker(3, 5).unwrap(), -1);
    assert_eq!(arith::kronecker(2, 7).unwrap(), 1);
    assert!(arith::kronecker(0, 0).is_err());
}

#[test]
fn legendre_matches_euler_criterion() {
    for p in (3..100).filter(|&p| naive_is_prime(p)) {
        for a in 0..p as i64 {
            let e = pow_mod(a, (p as i64 - 1) / 2, p as i64);
            let want = match e {
                0 => 0,
                1 => 1,
                _ => -1,
            };
            assert_eq!(arith::kronecker(a, p as i64).unwrap(), want, "({a}/{p})");
        }
    }
}

#[test]
fn eps_squared_is_minus_one_symbol() {
    for d in (-99i64..=99).filter(|d| d % 2 != 0) {
        let e = arith::eps(d).unwrap();
        let want = arith::kronecker(-1, d).unwrap() as f64;
        assert!((e * e - Complex64::new(want, 0.0)).norm() < 1e-15, "d = {d}");
    }
    assert!(arith::eps(4).is_err());
}

#[test]
fn moebius_and_divisor_count() {
    assert_eq!(arith::moebius(1).unwrap(), 1);
    assert_eq!(arith::moebius(12).unwrap(), 0);
    assert_eq!(arith::divisor_count(12).unwrap(), 6);
    let table = arith::moebius_table(2000);
    for n in 1..=2000u64 {
        assert_eq!(table[n as usize] as i32, naive_moebius(n), "n = {n}");
        assert_eq!(arith::moebius(n).unwrap(), naive_moebius(n));
    }
}

#[test]
fn squarefree_and_prime_set_splits() {
    let s = arith::squarefree_split(12).unwrap();
    assert_eq!((s.t, s.n), (3, 2));
    let s = arith::squarefree_split(90).unwrap();
    assert_eq!((s.t, s.n), (10, 3));
    let q = arith::prime_set_split(36, |p| p == 2).unwrap();
    assert_eq!((q.q, q.r), (4, 3));
    let q = arith::prime_set_split(50, |p| p == 2).unwrap();
    assert_eq!((q.q, q.r), (2, 5));
    assert!(arith::squarefree_split(0).is_err());
}

#[test]
fn squarefree_split_roundtrip() {
    for m in 1..=100_000u64 {
        let s = arith::squarefree_split(m).unwrap();
        assert_eq!(s.t * s.n * s.n, m);
        assert!(arith::is_squarefree(s.t), "m = {m}");
    }
}

#[test]
fn chi_t_examples() {
    assert_eq!(arith::chi_t(1, 2, 3).unwrap(), 1);
    assert_eq!(arith::chi_t(1, 3, 2).unwrap(), 0);
    assert_eq!(arith::chi_t(3, 6, 5).unwrap(), -1);
    assert!(arith::chi_t(4, 6, 5).is_err());
}

#[test]
fn ramanujan_sum_matches_exponential_sum() {
    for q in 1..40u64 {
        for m in -20i64..=20 {
            let direct: f64 = (1..=q)
                .filter(|&a| arith::gcd(a, q) == 1)
                .map(|a| (2.0 * std::f64::consts::PI * (a as f64) * (m as f64) / q as f64).cos())
                .sum();
            assert!((direct - arith::ramanujan_sum(q, m) as f64).abs() < 1e-9, "c_{q}({m})");
        }
    }
}

proptest! {
    #[test]
    fn kronecker_multiplicative_in_modulus(a in -500i64..500, m in 1i64..300, n in 1i64..300) {
        let m = 2 * m - 1;
        let n = 2 * n - 1;
        let lhs = arith::kronecker(a, m * n).unwrap();
        let rhs = arith::kronecker(a, m).unwrap() * arith::kronecker(a, n).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn kronecker_multiplicative_in_top(a in -300i64..300, b in -300i64..300, n in 1i64..500) {
        let n = 2 * n - 1;
        let lhs = arith::kronecker(a * b, n).unwrap();
        let rhs = arith::kronecker(a, n).unwrap() * arith::kronecker(b, n).unwrap();
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn prime_set_split_invariants(m in 1u64..1_000_000, mask in 0u32..64) {
        let small = [2u64, 3, 5, 7, 11, 13];
        let in_q = |p: u64| small.iter().position(|&x| x == p).is_some_and(|i| mask >> i & 1 == 1);
        let s = arith::prime_set_split(m, in_q).unwrap();
        prop_assert_eq!(s.q * s.r * s.r, m);
        for (p, e) in arith::factorize(s.r) {
            prop_assert!(!in_q(p), "prime {} of r lies in Q (e = {})", p, e);
        }
        for (p, e) in arith::factorize(s.q) {
            prop_assert!(e == 1 || in_q(p), "p² | q for p = {} outside Q", p);
        }
    }

    #[test]
    fn chi_t_has_period_4t(t in 1u64..200, ell in 2u32..12, n in -1000i64..1000) {
        prop_assume!(arith::is_squarefree(t));
        let a = arith::chi_t(t, ell, n).unwrap();
        let b = arith::chi_t(t, ell, n + 4 * t as i64).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn divisors_multiply_back(n in 1u64..100_000) {
        let d = arith::divisors(n);
        prop_assert_eq!(d.len() as u64, arith::divisor_count(n).unwrap());
        prop_assert_eq!(d.iter().sum::<u64>(), arith::sigma(n));
        prop_assert!(d.iter().all(|x| n % x == 0));
    }
}
