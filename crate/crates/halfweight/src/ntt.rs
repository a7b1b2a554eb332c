//! Number-theoretic transforms over 31-bit primes and multimodular exact
//! convolution with Garner reconstruction.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// A prime p < 2^31 with 2^27 | p − 1 or at least 2^23 | p − 1, plus its
/// Montgomery constants (R = 2^32).
#[derive(Clone, Debug)]
pub struct NttPrime {
    pub p: u32,
    pinv_neg: u32,
    r2: u32,
    root: u32,
    two_adicity: u32,
}

const PRIMES: [u32; 5] = [998_244_353, 167_772_161, 469_762_049, 754_974_721, 2_013_265_921];

/// The fixed prime set. The first four are used for reconstruction, the
/// fifth for a consistency check.
pub fn primes() -> &'static [NttPrime] {
    static P: OnceLock<Vec<NttPrime>> = OnceLock::new();
    P.get_or_init(|| PRIMES.iter().map(|&p| NttPrime::new(p)).collect())
}

fn pow_plain(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

impl NttPrime {
    fn new(p: u32) -> Self {
        let mut inv: u32 = 1;
        for _ in 0..5 {
            inv = inv.wrapping_mul(2u32.wrapping_sub(p.wrapping_mul(inv)));
        }
        let r = (1u64 << 32) % p as u64;
        let r2 = (r * r % p as u64) as u32;
        let two_adicity = (p - 1).trailing_zeros();
        let odd = (p as u64 - 1) >> two_adicity;
        let factors: Vec<u64> = crate::arith::factorize(odd).into_iter().map(|(q, _)| q).collect();
        let mut g = 2u64;
        let root = loop {
            let ok = pow_plain(g, (p as u64 - 1) / 2, p as u64) != 1
                && factors.iter().all(|&q| pow_plain(g, (p as u64 - 1) / q, p as u64) != 1);
            if ok {
                break g as u32;
            }
            g += 1;
        };
        NttPrime {
            p,
            pinv_neg: inv.wrapping_neg(),
            r2,
            root,
            two_adicity,
        }
    }

    #[inline(always)]
    fn reduce(&self, t: u64) -> u32 {
        let m = (t as u32).wrapping_mul(self.pinv_neg);
        let u = ((t + m as u64 * self.p as u64) >> 32) as u32;
        if u >= self.p {
            u - self.p
        } else {
            u
        }
    }

    /// Montgomery product.
    #[inline(always)]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.reduce(a as u64 * b as u64)
    }

    #[inline(always)]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline(always)]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    /// Integer to Montgomery form.
    pub fn from_i128(&self, x: i128) -> u32 {
        let r = x.rem_euclid(self.p as i128) as u32;
        self.mul(r, self.r2)
    }

    /// Montgomery form to canonical residue in [0, p).
    pub fn to_residue(&self, a: u32) -> u32 {
        self.reduce(a as u64)
    }

    pub fn pow(&self, mut b: u32, mut e: u64) -> u32 {
        let mut r = self.from_i128(1);
        while e > 0 {
            if e & 1 == 1 {
                r = self.mul(r, b);
            }
            b = self.mul(b, b);
            e >>= 1;
        }
        r
    }

    pub fn inv(&self, a: u32) -> u32 {
        self.pow(a, self.p as u64 - 2)
    }

    /// Largest supported transform length.
    pub fn max_len(&self) -> usize {
        1usize << self.two_adicity.min(27)
    }

    /// Stage twiddles laid out contiguously: entries [h, 2h) hold the
    /// powers w_{2h}^k, k < h, of a primitive 2h-th root of unity.
    fn stage_twiddles(&self, n: usize, inverse: bool) -> Vec<u32> {
        let g = self.from_i128(self.root as i128);
        let mut tw = vec![0u32; n.max(2)];
        let mut h = n / 2;
        let mut w = self.pow(g, (self.p as u64 - 1) / n as u64);
        if inverse {
            w = self.inv(w);
        }
        while h >= 1 {
            let mut cur = self.from_i128(1);
            for k in 0..h {
                tw[h + k] = cur;
                cur = self.mul(cur, w);
            }
            w = self.mul(w, w);
            h /= 2;
        }
        tw
    }

    fn transform(&self, a: &mut [u32], inverse: bool) {
        let n = a.len();
        assert!(n.is_power_of_two() && n <= self.max_len());
        let bits = n.trailing_zeros();
        if bits == 0 {
            return;
        }
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if i < j {
                a.swap(i, j);
            }
        }
        let tw = self.stage_twiddles(n, inverse);
        let mut half = 1;
        while half < n {
            let w = &tw[half..2 * half];
            for block in a.chunks_exact_mut(2 * half) {
                let (lo, hi) = block.split_at_mut(half);
                for ((u, v), &wk) in lo.iter_mut().zip(hi.iter_mut()).zip(w) {
                    let t = self.mul(*v, wk);
                    let x = *u;
                    *u = self.add(x, t);
                    *v = self.sub(x, t);
                }
            }
            half <<= 1;
        }
        if inverse {
            let ninv = self.inv(self.from_i128(n as i128));
            for x in a.iter_mut() {
                *x = self.mul(*x, ninv);
            }
        }
    }

    /// In-place forward transform of Montgomery-form data.
    pub fn forward(&self, a: &mut [u32]) {
        self.transform(a, false);
    }

    /// In-place inverse transform (including the 1/n scaling).
    pub fn inverse(&self, a: &mut [u32]) {
        self.transform(a, true);
    }
}

/// Garner reconstruction from residues modulo the first `k` primes of
/// [`primes`], as the centered representative in (−P/2, P/2].
pub fn garner(residues: &[u32]) -> i128 {
    let ps = primes();
    let k = residues.len();
    assert!(k <= 4, "at most four primes fit in u128");
    let mut digits = [0u64; 4];
    for i in 0..k {
        let p = ps[i].p as u64;
        let mut x = residues[i] as u64 % p;
        let mut prod = 1u64;
        let mut acc = 0u64;
        for j in 0..i {
            acc = (acc + digits[j] % p * prod) % p;
            prod = prod * (ps[j].p as u64 % p) % p;
        }
        x = (x + p - acc) % p;
        digits[i] = x * pow_plain(prod, p - 2, p) % p;
    }
    let mut value: u128 = 0;
    let mut big_p: u128 = 1;
    for i in 0..k {
        value += digits[i] as u128 * big_p;
        big_p *= ps[i].p as u128;
    }
    if value > big_p / 2 {
        (value as i128) - (big_p as i128)
    } else {
        value as i128
    }
}

/// Product of the first four primes.
pub fn modulus_product() -> u128 {
    primes()[..4].iter().map(|p| p.p as u128).product()
}

/// Smallest power of two ≥ n.
pub fn transform_len(n: usize) -> usize {
    n.next_power_of_two().max(1)
}

/// Exact truncated product of integer series: c(n) = Σ a(i) b(n−i), n < n_out.
///
/// Fails with [`Error::Overflow`] when the coefficient bound could exceed the
/// reconstruction range.
pub fn convolve_exact(a: &[i128], b: &[i128], n_out: usize) -> Result<Vec<i128>> {
    let n_out = n_out.min(a.len() + b.len().saturating_sub(1));
    if a.is_empty() || b.is_empty() || n_out == 0 {
        return Ok(vec![0; n_out]);
    }
    let ma = a.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
    let mb = b.iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
    let terms = a.len().min(b.len()).min(n_out) as u128;
    let bound = ma
        .checked_mul(mb)
        .and_then(|x| x.checked_mul(terms))
        .ok_or_else(|| Error::Overflow("convolution bound exceeds u128".into()))?;
    if bound >= modulus_product() / 2 {
        return Err(Error::Overflow(format!(
            "convolution bound {bound} exceeds multimodular range"
        )));
    }
    if (a.len().min(n_out) as u128) * (b.len().min(n_out) as u128) <= 4096 {
        let mut c = vec![0i128; n_out];
        for (i, &x) in a.iter().enumerate().take(n_out) {
            if x == 0 {
                continue;
            }
            for (j, &y) in b.iter().enumerate().take(n_out - i) {
                c[i + j] += x * y;
            }
        }
        return Ok(c);
    }
    let a = &a[..a.len().min(n_out)];
    let b = &b[..b.len().min(n_out)];
    let len = transform_len(a.len() + b.len() - 1);
    let ps = &primes()[..4];
    let residues: Vec<Vec<u32>> = ps
        .iter()
        .map(|pr| {
            let mut fa = vec![0u32; len];
            let mut fb = vec![0u32; len];
            for (i, &x) in a.iter().enumerate() {
                fa[i] = pr.from_i128(x);
            }
            for (i, &x) in b.iter().enumerate() {
                fb[i] = pr.from_i128(x);
            }
            pr.forward(&mut fa);
            pr.forward(&mut fb);
            for (x, y) in fa.iter_mut().zip(&fb) {
                *x = pr.mul(*x, *y);
            }
            pr.inverse(&mut fa);
            fa.truncate(n_out);
            fa.into_iter().map(|x| pr.to_residue(x)).collect()
        })
        .collect();
    Ok((0..n_out)
        .map(|n| {
            let r = [residues[0][n], residues[1][n], residues[2][n], residues[3][n]];
            garner(&r)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn montgomery_roundtrip() {
        for pr in primes() {
            for x in [0i128, 1, -1, 12345, -987654321, pr.p as i128 - 1] {
                let m = pr.from_i128(x);
                assert_eq!(pr.to_residue(m) as i128, x.rem_euclid(pr.p as i128));
            }
            let a = pr.from_i128(3);
            assert_eq!(pr.to_residue(pr.mul(a, pr.inv(a))), 1);
            assert!(pr.max_len() >= 1 << 23);
        }
    }

    #[test]
    fn garner_signed() {
        for x in [0i128, 5, -5, 1 << 100, -(1 << 100) + 7] {
            let r: Vec<u32> = primes()[..4]
                .iter()
                .map(|p| x.rem_euclid(p.p as i128) as u32)
                .collect();
            assert_eq!(garner(&r), x);
        }
    }

    #[test]
    fn convolution_matches_schoolbook() {
        let a: Vec<i128> = (0..300).map(|i| (i * 7919 % 1001) as i128 - 500).collect();
        let b: Vec<i128> = (0..250).map(|i| (i * 104729 % 3001) as i128 - 1500).collect();
        let c = convolve_exact(&a, &b, 400).unwrap();
        for n in 0..400 {
            let mut s = 0i128;
            for i in 0..=n {
                if i < a.len() && n - i < b.len() {
                    s += a[i] * b[n - i];
                }
            }
            assert_eq!(c[n], s);
        }
    }

    #[test]
    fn convolution_overflow_detected() {
        let a = vec![1i128 << 70; 10];
        assert!(convolve_exact(&a, &a, 10).is_err());
    }
}
