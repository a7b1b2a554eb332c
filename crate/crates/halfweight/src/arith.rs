//! Integer kernels: quadratic symbols, ε_d, factorization, Möbius and
//! divisor functions, squarefree splittings and the characters χ_t.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

const SIEVE_LIMIT: usize = 1_000_000;

fn spf_table() -> &'static Vec<u32> {
    static SPF: OnceLock<Vec<u32>> = OnceLock::new();
    SPF.get_or_init(|| smallest_prime_factors(SIEVE_LIMIT))
}

/// Smallest prime factor of every n ≤ limit (0 and 1 map to themselves).
pub fn smallest_prime_factors(limit: usize) -> Vec<u32> {
    let mut spf: Vec<u32> = (0..=limit as u32).collect();
    let mut i = 2usize;
    while i * i <= limit {
        if spf[i] == i as u32 {
            let mut j = i * i;
            while j <= limit {
                if spf[j] == j as u32 {
                    spf[j] = i as u32;
                }
                j += i;
            }
        }
        i += 1;
    }
    spf
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn gcd_i(a: i64, b: i64) -> i64 {
    gcd(a.unsigned_abs(), b.unsigned_abs()) as i64
}

/// Inverse of `a` modulo `m` (m ≥ 1); `None` when gcd(a, m) > 1.
pub fn mod_inverse(a: i64, m: i64) -> Option<i64> {
    if m == 1 {
        return Some(0);
    }
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i64, 0i64);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    (r0 == 1).then(|| s0.rem_euclid(m))
}

fn jacobi_odd(mut a: i64, mut n: i64) -> i32 {
    debug_assert!(n > 0 && n % 2 == 1);
    a = a.rem_euclid(n);
    let mut t = 1;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let r = n % 8;
            if r == 3 || r == 5 {
                t = -t;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a % 4 == 3 && n % 4 == 3 {
            t = -t;
        }
        a %= n;
    }
    if n == 1 {
        t
    } else {
        0
    }
}

/// Kronecker symbol (a/n).
///
/// Completely multiplicative in n, equal to the Legendre symbol at odd primes,
/// with (a/−1) = sign(a) and (a/2) = 0, 1, −1 according as a is even, ±1 or
/// ±3 mod 8. Every call site in the library has an odd positive argument, so
/// the extension only matters for diagnostics.
pub fn kronecker(a: i64, n: i64) -> Result<i32> {
    if a == 0 && n == 0 {
        return Err(Error::InvalidArgument("kronecker(0, 0) is undefined".into()));
    }
    if n == 0 {
        return Ok(if a.abs() == 1 { 1 } else { 0 });
    }
    let mut sign = 1;
    let mut m = n;
    if m < 0 {
        m = -m;
        if a < 0 {
            sign = -sign;
        }
    }
    let v = m.trailing_zeros();
    if v > 0 {
        if a % 2 == 0 {
            return Ok(0);
        }
        let r = a.rem_euclid(8);
        if v % 2 == 1 && (r == 3 || r == 5) {
            sign = -sign;
        }
        m >>= v;
    }
    Ok(sign * jacobi_odd(a, m))
}

/// Jacobi symbol for odd positive n (hot-path helper, no error handling).
#[inline]
pub fn jacobi(a: i64, n: i64) -> i32 {
    jacobi_odd(a, n)
}

/// Exponent k with ε_d = i^k: 0 for d ≡ 1 and 1 for d ≡ 3 (mod 4).
pub fn eps_exponent(d: i64) -> Result<u32> {
    if d % 2 == 0 {
        return Err(Error::InvalidArgument(format!("eps requires odd d, got {d}")));
    }
    Ok(if d.rem_euclid(4) == 1 { 0 } else { 1 })
}

/// ε_d = 1 or i according as d ≡ 1 or 3 (mod 4); negative d are reduced
/// mod 4 as well, so ε_{−1} = i and ε_{−1}² = −1 = (−1/−1).
pub fn eps(d: i64) -> Result<Complex64> {
    Ok(i_pow(eps_exponent(d)? as i64))
}

/// i^k for any integer k.
pub fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Prime factorization as (prime, exponent) pairs in increasing order.
pub fn factorize(n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n <= 1 {
        return out;
    }
    if n as usize <= SIEVE_LIMIT {
        let spf = spf_table();
        let mut m = n as usize;
        while m > 1 {
            let p = spf[m] as usize;
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            out.push((p as u64, e));
        }
        return out;
    }
    let mut m = n;
    let spf = spf_table();
    let mut p = 2u64;
    while p * p <= m && (p as usize) <= SIEVE_LIMIT {
        if spf[p as usize] as u64 == p && m % p == 0 {
            let mut e = 0;
            while m % p == 0 {
                m /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += 1;
    }
    if m > 1 {
        let mut big = Vec::new();
        split_large(m, &mut big);
        big.sort_unstable();
        for q in big {
            match out.last_mut() {
                Some((p, e)) if *p == q => *e += 1,
                _ => out.push((q, 1)),
            }
        }
    }
    out
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn pollard_rho(n: u64) -> u64 {
    let mut c = 1u64;
    loop {
        let f = |x: u64| (mul_mod(x, x, n) + c) % n;
        let (mut x, mut y, mut d) = (2u64, 2u64, 1u64);
        while d == 1 {
            x = f(x);
            y = f(f(y));
            d = gcd(x.abs_diff(y), n);
        }
        if d != n {
            return d;
        }
        c += 1;
    }
}

fn split_large(n: u64, out: &mut Vec<u64>) {
    if n == 1 {
        return;
    }
    if is_prime_u64(n) {
        out.push(n);
        return;
    }
    let d = pollard_rho(n);
    split_large(d, out);
    split_large(n / d, out);
}

pub fn moebius(n: u64) -> Result<i32> {
    if n == 0 {
        return Err(Error::InvalidArgument("moebius(0)".into()));
    }
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        return Ok(0);
    }
    Ok(if f.len() % 2 == 0 { 1 } else { -1 })
}

pub fn divisor_count(n: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::InvalidArgument("divisor_count(0)".into()));
    }
    Ok(factorize(n).iter().map(|&(_, e)| e as u64 + 1).product())
}

/// Sum of divisors σ(n).
pub fn sigma(n: u64) -> u64 {
    factorize(n)
        .iter()
        .map(|&(p, e)| (p.pow(e + 1) - 1) / (p - 1))
        .product()
}

/// All positive divisors of n in increasing order.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factorize(n) {
        let len = ds.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                ds.push(ds[i] * pk);
            }
        }
    }
    ds.sort_unstable();
    ds
}

pub fn is_squarefree(n: u64) -> bool {
    n > 0 && factorize(n).iter().all(|&(_, e)| e == 1)
}

/// Möbius function on [0, n] by a linear sieve (index 0 holds 0).
pub fn moebius_table(n: usize) -> Vec<i8> {
    let mut mu = vec![1i8; n + 1];
    let mut is_comp = vec![false; n + 1];
    let mut primes = Vec::new();
    mu[0] = 0;
    for i in 2..=n {
        if !is_comp[i] {
            primes.push(i);
            mu[i] = -1;
        }
        for &p in &primes {
            let ip = i * p;
            if ip > n {
                break;
            }
            is_comp[ip] = true;
            if i % p == 0 {
                mu[ip] = 0;
                break;
            }
            mu[ip] = -mu[i];
        }
    }
    mu
}

/// Unique decomposition m = t·n² with t squarefree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SquarefreeSplit {
    pub t: u64,
    pub n: u64,
}

pub fn squarefree_split(m: u64) -> Result<SquarefreeSplit> {
    if m == 0 {
        return Err(Error::InvalidArgument("squarefree_split(0)".into()));
    }
    let (mut t, mut n) = (1u64, 1u64);
    for (p, e) in factorize(m) {
        n *= p.pow(e / 2);
        if e % 2 == 1 {
            t *= p;
        }
    }
    Ok(SquarefreeSplit { t, n })
}

/// Decomposition m = q·r² where every prime of r lies outside Q and every
/// prime whose square divides q lies in Q.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeSetSplit {
    pub q: u64,
    pub r: u64,
}

pub fn prime_set_split(m: u64, in_q: impl Fn(u64) -> bool) -> Result<PrimeSetSplit> {
    if m == 0 {
        return Err(Error::InvalidArgument("prime_set_split(0)".into()));
    }
    let (mut q, mut r) = (1u64, 1u64);
    for (p, e) in factorize(m) {
        if in_q(p) {
            q *= p.pow(e);
        } else {
            q *= p.pow(e % 2);
            r *= p.pow(e / 2);
        }
    }
    Ok(PrimeSetSplit { q, r })
}

/// χ_t(n) = χ₀(n)·(−1/n)^ℓ·(t/n) with χ₀ the principal character mod 4.
pub fn chi_t(t: u64, ell: u32, n: i64) -> Result<i32> {
    if !is_squarefree(t) {
        return Err(Error::InvalidArgument(format!("chi_t needs squarefree t, got {t}")));
    }
    if n % 2 == 0 {
        return Ok(0);
    }
    let minus = if ell % 2 == 1 { kronecker(-1, n)? } else { 1 };
    Ok(minus * kronecker(t as i64, n)?)
}

/// Ramanujan sum c_q(m) = Σ_{g | (q, m)} μ(q/g)·g.
pub fn ramanujan_sum(q: u64, m: i64) -> i64 {
    let g0 = gcd(q, m.unsigned_abs());
    let g0 = if m == 0 { q } else { g0 };
    divisors(g0)
        .into_iter()
        .map(|g| moebius(q / g).unwrap() as i64 * g as i64)
        .sum()
}

/// Odd squarefree positive integers up to `n`.
pub fn odd_squarefree_upto(n: u64) -> Vec<u64> {
    (1..=n).step_by(2).filter(|&r| is_squarefree(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronecker_examples() {
        assert_eq!(kronecker(1, 1).unwrap(), 1);
        assert_eq!(kronecker(3, 5).unwrap(), -1);
        assert_eq!(kronecker(2, 7).unwrap(), 1);
        assert!(kronecker(0, 0).is_err());
        assert_eq!(kronecker(5, 2).unwrap(), -1);
        assert_eq!(kronecker(7, 2).unwrap(), 1);
        assert_eq!(kronecker(-1, -1).unwrap(), -1);
    }

    #[test]
    fn eps_values() {
        assert_eq!(eps(1).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(eps(3).unwrap(), Complex64::new(0.0, 1.0));
        let e = eps(-1).unwrap();
        assert_eq!(e * e, Complex64::new(kronecker(-1, -1).unwrap() as f64, 0.0));
        assert!(eps(4).is_err());
    }

    #[test]
    fn arithmetic_functions() {
        assert_eq!(moebius(1).unwrap(), 1);
        assert_eq!(moebius(12).unwrap(), 0);
        assert_eq!(moebius(30).unwrap(), -1);
        assert_eq!(divisor_count(12).unwrap(), 6);
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(sigma(12), 28);
        assert!(moebius(0).is_err());
    }

    #[test]
    fn splits() {
        assert_eq!(squarefree_split(1).unwrap(), SquarefreeSplit { t: 1, n: 1 });
        assert_eq!(squarefree_split(12).unwrap(), SquarefreeSplit { t: 3, n: 2 });
        assert_eq!(squarefree_split(90).unwrap(), SquarefreeSplit { t: 10, n: 3 });
        let two = |p: u64| p == 2;
        assert_eq!(prime_set_split(1, two).unwrap(), PrimeSetSplit { q: 1, r: 1 });
        assert_eq!(prime_set_split(36, two).unwrap(), PrimeSetSplit { q: 4, r: 3 });
        assert_eq!(prime_set_split(50, two).unwrap(), PrimeSetSplit { q: 2, r: 5 });
    }

    #[test]
    fn chi_t_examples() {
        assert_eq!(chi_t(1, 6, 3).unwrap(), 1);
        assert_eq!(chi_t(1, 5, 2).unwrap(), 0);
        assert_eq!(chi_t(3, 6, 5).unwrap(), -1);
    }

    #[test]
    fn large_factorization() {
        let n = 1_000_003u64 * 999_983;
        assert_eq!(factorize(n), vec![(999_983, 1), (1_000_003, 1)]);
        assert_eq!(factorize(2u64.pow(40) * 3), vec![(2, 40), (3, 1)]);
    }

    #[test]
    fn ramanujan() {
        assert_eq!(ramanujan_sum(1, 7), 1);
        assert_eq!(ramanujan_sum(9, 3), -3);
        assert_eq!(ramanujan_sum(9, 9), 6);
        assert_eq!(ramanujan_sum(5, 1), -1);
    }

    #[test]
    fn moebius_table_agrees() {
        let t = moebius_table(2000);
        for n in 1..=2000u64 {
            assert_eq!(t[n as usize] as i32, moebius(n).unwrap());
        }
    }

    #[test]
    fn inverse() {
        assert_eq!(mod_inverse(4, 9), Some(7));
        assert_eq!(mod_inverse(3, 9), None);
        assert_eq!(mod_inverse(5, 1), Some(0));
    }
}
