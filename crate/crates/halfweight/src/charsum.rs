//! The twisted character sums Σ*_v ϖ_d(m, v): direct evaluation, the
//! Gauss-sum closed form, and the Weil-bound grid.
//!
//! All phases are kept as integer numerators over 32·d (or 32·b) and
//! reduced before a single complex exponential is taken.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::arith;
use crate::error::{Error, Result};
use crate::hecke::Family;
use crate::par;

/// Parity class of the modulus d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Parity {
    FourDivides,
    TwoExactly,
    Odd,
}

/// d = 2^e a² b with b odd squarefree and (a, 2b) = 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Decomposition {
    pub e: u32,
    pub a: u64,
    pub b: u64,
}

/// A modulus d with its parity data, period q_d and dual coefficient family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TwistSpec {
    pub d: u64,
    pub parity: Parity,
    pub q_d: u64,
    pub family: Family,
    pub decomposition: Option<Decomposition>,
}

impl TwistSpec {
    pub fn new(d: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("modulus must be positive".into()));
        }
        let (parity, q_d, family) = if d % 4 == 0 {
            (Parity::FourDivides, d, Family::F)
        } else if d % 2 == 0 {
            (Parity::TwoExactly, 2 * d, Family::G)
        } else {
            (Parity::Odd, 2 * d, Family::H)
        };
        Ok(TwistSpec {
            d,
            parity,
            q_d,
            family,
            decomposition: decompose(d),
        })
    }

    pub fn decomposition(&self) -> Result<Decomposition> {
        self.decomposition.ok_or_else(|| {
            Error::InvalidArgument(format!("{} has no decomposition 2^e a² b with (a, 2b) = 1", self.d))
        })
    }

    /// Required residue of m mod 4 in the 2∥d class.
    pub fn support_ok(&self, ell: u32, m: u64) -> bool {
        self.parity != Parity::TwoExactly || m % 4 == if ell % 2 == 0 { 1 } else { 3 }
    }
}

/// The admissible decomposition d = 2^e a² b, if any.
pub fn decompose(d: u64) -> Option<Decomposition> {
    let e = d.trailing_zeros();
    if e > 2 {
        return None;
    }
    let mut a = 1u64;
    let mut b = 1u64;
    for (p, k) in arith::factorize(d >> e) {
        match k {
            1 => b *= p,
            _ if k % 2 == 0 => a *= p.pow(k / 2),
            _ => return None,
        }
    }
    Some(Decomposition { e, a, b })
}

#[inline]
fn cis_frac(num: i64, den: i64) -> Complex64 {
    let r = num.rem_euclid(den);
    let (s, c) = (2.0 * PI * r as f64 / den as f64).sin_cos();
    Complex64::new(c, s)
}

fn k_of(ell: u32) -> i64 {
    2 * ell as i64 + 1
}

/// ϖ_d(n, v) as an integer phase numerator over 32d and a sign.
fn varpi_phase(spec: &TwistSpec, ell: u32, n: u64, v: i64) -> (i64, i32) {
    let d = spec.d as i64;
    let big = 32 * d;
    let k = k_of(ell);
    let n_red = (n % (4 * spec.d)) as i64;
    match spec.parity {
        Parity::Odd => {
            let inv4 = if d == 1 { 0 } else { arith::mod_inverse(4, d).unwrap() };
            let sign = if d == 1 { 1 } else { arith::jacobi(v, d) };
            let d3 = if d.rem_euclid(4) == 3 { 1 } else { 0 };
            let lin = (inv4 as i128 * n_red as i128 * v as i128).rem_euclid(d as i128) as i64;
            let ph = k * 4 * d + k * 8 * d * d3 - 32 * lin;
            (ph.rem_euclid(big), sign)
        }
        Parity::FourDivides | Parity::TwoExactly => {
            let vr = v.rem_euclid(if spec.parity == Parity::FourDivides { d } else { 4 * d });
            let v3 = if v.rem_euclid(4) == 3 { 1 } else { 0 };
            let sign = arith::jacobi(d, v.rem_euclid(4 * d).max(1));
            let lin = if spec.parity == Parity::FourDivides {
                32 * ((n_red as i128 * vr as i128).rem_euclid(d as i128) as i64)
            } else {
                8 * ((n_red as i128 * vr as i128).rem_euclid(4 * d as i128) as i64)
            };
            let ph = k * 8 * d - k * 8 * d * v3 - lin;
            (ph.rem_euclid(big), sign)
        }
    }
}

/// ϖ_d(n, v) for (v, d) = 1; in the 2∥d class n ≡ (−1)^ℓ (mod 4).
pub fn varpi(spec: &TwistSpec, ell: u32, n: u64, v: i64) -> Result<Complex64> {
    if arith::gcd(v.unsigned_abs(), spec.d) != 1 {
        return Err(Error::InvalidArgument(format!("gcd({v}, {}) > 1", spec.d)));
    }
    if !spec.support_ok(ell, n) {
        return Err(Error::InvalidArgument(format!(
            "n = {n} violates the support congruence for d = {}",
            spec.d
        )));
    }
    let v = if spec.parity == Parity::Odd { v } else { positive_odd_lift(v, spec.d) };
    let (ph, sign) = varpi_phase(spec, ell, n, v);
    Ok(cis_frac(ph, 32 * spec.d as i64) * sign as f64)
}

fn positive_odd_lift(v: i64, d: u64) -> i64 {
    let r = v.rem_euclid(d as i64);
    if r == 0 {
        d as i64
    } else {
        r
    }
}

/// Σ*_{v mod d} ϖ_d(m, v), by direct summation over v ∈ [1, d].
pub fn brute_sum(spec: &TwistSpec, ell: u32, m: u64) -> Result<Complex64> {
    if !spec.support_ok(ell, m) {
        return Err(Error::InvalidArgument(format!("m = {m} outside the support class")));
    }
    let mut s = Complex64::default();
    for v in 1..=spec.d as i64 {
        if arith::gcd(v as u64, spec.d) == 1 {
            let (ph, sign) = varpi_phase(spec, ell, m, v);
            s += cis_frac(ph, 32 * spec.d as i64) * sign as f64;
        }
    }
    Ok(s)
}

/// G_{e,b}(m).
///
/// e = 0: i^{ℓ+1/2} ε_b^{2ℓ+1} Σ*_{β mod b} (β/b) e(−4̄mβ/b).
/// e ∈ {1, 2}: θ₊S₁ + θ₋S_{χ₄} with θ± = ½(i^{2ℓ+1} ± 1) and
/// S_ψ = Σ*_{β mod 2^e b} ψ(β) (2^e b/β) e(−mβ/(2^{4−e} b)).
pub fn gauss_g(e: u32, b: u64, ell: u32, m: u64) -> Complex64 {
    let k = k_of(ell);
    let bi = b as i64;
    let big = 32 * bi;
    if e == 0 {
        let inv4 = if b == 1 { 0 } else { arith::mod_inverse(4, bi).unwrap() };
        let mr = (m % b) as i64;
        let mut s = Complex64::default();
        for beta in 1..=bi {
            if arith::gcd(beta as u64, b) != 1 {
                continue;
            }
            let sign = if b == 1 { 1 } else { arith::jacobi(beta, bi) };
            let lin = (inv4 * mr % bi * beta) % bi;
            s += cis_frac(-32 * lin, big) * sign as f64;
        }
        let b3 = if bi % 4 == 3 { 1 } else { 0 };
        return s * cis_frac(k * 4 * bi + k * 8 * bi * b3, big);
    }
    let modulus = (1i64 << e) * bi;
    let den = (1i64 << (4 - e)) * bi;
    let mr = (m % den as u64) as i64;
    let mut s1 = Complex64::default();
    let mut s4 = Complex64::default();
    for beta in (1..=modulus).step_by(2) {
        if arith::gcd(beta as u64, b) != 1 {
            continue;
        }
        let sign = arith::jacobi(modulus, beta) as f64;
        let t = cis_frac(-(mr * beta % den) * (big / den), big) * sign;
        s1 += t;
        if beta % 4 == 1 {
            s4 += t;
        } else {
            s4 -= t;
        }
    }
    let ik = arith::i_pow(k);
    let tp = (ik + 1.0) * 0.5;
    let tm = (ik - 1.0) * 0.5;
    tp * s1 + tm * s4
}

/// Closed form G_{e,b}(m)·c_{a²}(m) of Σ*_v ϖ_d(m, v), with c_q the
/// Ramanujan sum.
pub fn closed_form(spec: &TwistSpec, ell: u32, m: u64) -> Result<Complex64> {
    let dc = spec.decomposition()?;
    if !spec.support_ok(ell, m) {
        return Err(Error::InvalidArgument(format!("m = {m} outside the support class")));
    }
    let c = arith::ramanujan_sum(dc.a * dc.a, m as i64) as f64;
    if c == 0.0 {
        return Ok(Complex64::default());
    }
    Ok(gauss_g(dc.e, dc.b, ell, m) * c)
}

/// Period in m of G_{e,b}(m).
pub fn gauss_period(e: u32, b: u64) -> u64 {
    if e == 0 {
        b
    } else {
        (1u64 << (4 - e)) * b
    }
}

/// One row of the verification grid.
#[derive(Clone, Debug, Serialize)]
pub struct CharsumRow {
    pub e: u32,
    pub a: u64,
    pub b: u64,
    pub d: u64,
    pub m: u64,
    pub brute_re: f64,
    pub brute_im: f64,
    pub closed_re: f64,
    pub closed_im: f64,
    pub abs_diff: f64,
    pub weil_ratio: f64,
    pub g_ratio: f64,
    pub ramanujan: i64,
    pub weil_ok: bool,
    pub g_bound_ok: bool,
}

/// Admissible (e, a, b) with 2^e a² b ≤ d_max.
pub fn admissible_moduli(d_max: u64) -> Vec<Decomposition> {
    let mut out = Vec::new();
    for e in 0..=2u32 {
        let mut a = 1u64;
        while (1u64 << e) * a * a <= d_max {
            let mut b = 1u64;
            while (1u64 << e) * a * a * b <= d_max {
                if arith::is_squarefree(b) && arith::gcd(a, b) == 1 {
                    out.push(Decomposition { e, a, b });
                }
                b += 2;
            }
            a += 2;
        }
    }
    out
}

/// The full grid: every admissible (e, a, b) with d ≤ d_max and every
/// m ≤ m_max in the support class.
pub fn verify_grid(ell: u32, d_max: u64, m_max: u64, parallel: bool) -> Result<Vec<CharsumRow>> {
    let mut tuples = Vec::new();
    for dc in admissible_moduli(d_max) {
        for m in 1..=m_max {
            if dc.e == 1 && m % 4 != if ell % 2 == 0 { 1 } else { 3 } {
                continue;
            }
            tuples.push((dc, m));
        }
    }
    par::map(&tuples, parallel, |&(dc, m)| {
        let d = (1u64 << dc.e) * dc.a * dc.a * dc.b;
        let spec = TwistSpec::new(d)?;
        let brute = brute_sum(&spec, ell, m)?;
        let closed = closed_form(&spec, ell, m)?;
        let g = gauss_g(dc.e, dc.b, ell, m);
        let weil = arith::divisor_count(d)? as f64 * ((d * arith::gcd(d, m)) as f64).sqrt();
        let weil_ratio = brute.norm() / weil;
        let g_ratio = g.norm() / (dc.b as f64).sqrt();
        Ok(CharsumRow {
            e: dc.e,
            a: dc.a,
            b: dc.b,
            d,
            m,
            brute_re: brute.re,
            brute_im: brute.im,
            closed_re: closed.re,
            closed_im: closed.im,
            abs_diff: (brute - closed).norm(),
            weil_ratio,
            g_ratio,
            ramanujan: arith::ramanujan_sum(dc.a * dc.a, m as i64),
            weil_ok: brute.norm() <= weil + 1e-9,
            g_bound_ok: g_ratio <= 8.0,
        })
    })
    .into_iter()
    .collect()
}
