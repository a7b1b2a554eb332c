//! Exact construction of the cusp space S_{ℓ+1/2}(Γ0(4)) and of the basis
//! images at the cusps 0 and −1/2.
//!
//! With k = 2ℓ+1, J = ⌊k/4⌋ and G = θ⁴ − 16F, the forms
//! b_a = θ^{k−4J} F^a G^{J−a} (1 ≤ a ≤ J−1) form a basis with leading
//! term q^a. Slash rules: θ|W₄ = θ, F|W₄ = G/16, G|W₄ = 16F, hence
//! b_a|W₄ = 16^{J−2a} b_{J−a}; and θ ↦ θ_odd, F ↦ θ(4z)⁴/16,
//! G ↦ θ_odd⁴ − θ(4z)⁴ under f ↦ f|[ρ_{−1/2}](4z).

use crate::error::{Error, Result};
use crate::ntt::{self, NttPrime};
use crate::par;
use crate::qexp::{self, QExpansion};

/// Exact truncated product Π factors, computed residue-wise modulo NTT
/// primes. Three primes are tried first and the fifth checks the
/// reconstruction; a fourth is added when the check fails.
pub fn product_exact(factors: &[&[i128]], n_out: usize, parallel: bool) -> Result<Vec<i128>> {
    if factors.is_empty() {
        let mut one = vec![0i128; n_out];
        if n_out > 0 {
            one[0] = 1;
        }
        return Ok(one);
    }
    let len = ntt::transform_len(2 * n_out);
    let all: Vec<&NttPrime> = ntt::primes().iter().collect();
    if all.iter().any(|p| p.max_len() < len) {
        return Err(Error::InvalidArgument(format!("series length {n_out} exceeds transform limits")));
    }
    let first: Vec<&NttPrime> = vec![all[0], all[1], all[2], all[4]];
    let mut residues: Vec<Vec<u32>> = par::map(&first, parallel, |pr| residue_product(pr, factors, n_out, len));
    let check = residues.pop().unwrap();
    let p5 = all[4].p as i128;
    let try_reconstruct = |res: &[Vec<u32>]| -> Option<Vec<i128>> {
        let mut out = Vec::with_capacity(n_out);
        let mut r = vec![0u32; res.len()];
        for n in 0..n_out {
            for (ri, col) in r.iter_mut().zip(res) {
                *ri = col[n];
            }
            let v = ntt::garner(&r);
            if v.rem_euclid(p5) as u32 != check[n] {
                return None;
            }
            out.push(v);
        }
        Some(out)
    };
    if let Some(v) = try_reconstruct(&residues) {
        return Ok(v);
    }
    residues.push(residue_product(all[3], factors, n_out, len));
    try_reconstruct(&residues).ok_or_else(|| Error::Overflow("coefficients exceed the multimodular range".into()))
}

fn residue_product(pr: &NttPrime, factors: &[&[i128]], n_out: usize, len: usize) -> Vec<u32> {
    let load = |s: &[i128]| {
        let mut v = vec![0u32; len];
        for (i, &x) in s.iter().take(n_out).enumerate() {
            v[i] = pr.from_i128(x);
        }
        v
    };
    // Cache forward transforms of repeated factors (compared by address).
    let mut cache: Vec<(*const i128, Vec<u32>)> = Vec::new();
    let mut acc = load(factors[0]);
    for f in &factors[1..] {
        let key = f.as_ptr();
        if !cache.iter().any(|(k, _)| *k == key) {
            let mut t = load(f);
            pr.forward(&mut t);
            cache.push((key, t));
        }
        let ft = &cache.iter().find(|(k, _)| *k == key).unwrap().1;
        acc[n_out..].iter_mut().for_each(|x| *x = 0);
        pr.forward(&mut acc);
        for (x, y) in acc.iter_mut().zip(ft) {
            *x = pr.mul(*x, *y);
        }
        pr.inverse(&mut acc);
    }
    acc.truncate(n_out);
    acc.into_iter().map(|x| pr.to_residue(x)).collect()
}

/// σ(n) for n < len (σ(0) = 0).
fn sigma_table(len: usize) -> Vec<i128> {
    let mut s = vec![0i128; len];
    for d in 1..len {
        for m in (d..len).step_by(d) {
            s[m] += d as i128;
        }
    }
    s
}

fn coeffs_of(q: &QExpansion) -> Vec<i128> {
    match &q.coeffs {
        qexp::Coeffs::Exact { num, den } => {
            assert_eq!(*den, 1, "integral series expected");
            num.clone()
        }
        qexp::Coeffs::Numeric(_) => unreachable!("generators are exact"),
    }
}

/// The cusp space with exact integral basis expansions at ∞ and −1/2.
#[derive(Clone, Debug)]
pub struct CuspSpace {
    pub ell: u32,
    /// k = 2ℓ + 1.
    pub k: u32,
    /// J = ⌊k/4⌋; the dimension is J − 1.
    pub j: u32,
    pub n_max: usize,
    /// b_a for a = 1..J−1 (index a−1), coefficients 0..=n_max.
    pub basis: Vec<Vec<i128>>,
    /// 16^a·(b_a|[ρ_{−1/2}](4z)) for a = 1..J−1, coefficients 0..=n_max.
    pub basis_cusp_half: Vec<Vec<i128>>,
}

impl CuspSpace {
    /// Build the space with expansions through index n_max.
    pub fn new(ell: u32, n_max: usize, parallel: bool) -> Result<Self> {
        if ell < 2 {
            return Err(Error::InvalidArgument("weight parameter ell must be at least 2".into()));
        }
        let k = 2 * ell + 1;
        let j = k / 4;
        if j < 2 {
            return Err(Error::ZeroSpace { ell });
        }
        let n_max = n_max.max(j as usize);
        let n = n_max + 1;
        let th = coeffs_of(&qexp::theta(n_max));
        let ff = coeffs_of(&qexp::eis_f(n_max));
        // Jacobi: r₄(n) = 8σ(n) − 32σ(n/4); four odd squares: 16σ(n/4) for n ≡ 4 (mod 8).
        let sig = sigma_table(n);
        let th4: Vec<i128> = (0..n)
            .map(|i| match i {
                0 => 1,
                _ if i % 4 == 0 => 8 * sig[i] - 32 * sig[i / 4],
                _ => 8 * sig[i],
            })
            .collect();
        let gg: Vec<i128> = th4.iter().zip(&ff).map(|(a, b)| a - 16 * b).collect();
        let to = coeffs_of(&qexp::theta_odd(n_max));
        let to4: Vec<i128> = (0..n).map(|i| if i % 8 == 4 { 16 * sig[i / 4] } else { 0 }).collect();
        // θ(4z)⁴ has the coefficients of θ⁴ at n/4.
        let t44: Vec<i128> = (0..n).map(|i| if i % 4 == 0 { th4[i / 4] } else { 0 }).collect();
        let gh: Vec<i128> = to4.iter().zip(&t44).map(|(a, b)| a - b).collect();
        let odd = (k - 4 * j) as usize;
        let mut basis = Vec::new();
        let mut basis_cusp_half = Vec::new();
        for a in 1..j as usize {
            let mut fs: Vec<&[i128]> = vec![&th; odd];
            fs.extend(std::iter::repeat(ff.as_slice()).take(a));
            fs.extend(std::iter::repeat(gg.as_slice()).take(j as usize - a));
            basis.push(product_exact(&fs, n, parallel)?);
            let mut gs: Vec<&[i128]> = vec![&to; odd];
            gs.extend(std::iter::repeat(t44.as_slice()).take(a));
            gs.extend(std::iter::repeat(gh.as_slice()).take(j as usize - a));
            basis_cusp_half.push(product_exact(&gs, n, parallel)?);
        }
        let space = CuspSpace {
            ell,
            k,
            j,
            n_max,
            basis,
            basis_cusp_half,
        };
        space.check_triangular()?;
        Ok(space)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn check_triangular(&self) -> Result<()> {
        for (i, b) in self.basis.iter().enumerate() {
            let a = i + 1;
            if b[..a].iter().any(|&x| x != 0) || b[a] != 1 {
                return Err(Error::Invariant(format!("basis element {a} is not normalized q^{a} + ...")));
            }
        }
        Ok(())
    }

    /// Basis element b_a (1-based) as an exact expansion.
    pub fn basis_expansion(&self, a: usize) -> QExpansion {
        QExpansion::exact(self.k, 4, self.basis[a - 1].clone(), 1)
    }

    /// b_a|[ρ_{−1/2}](4z) as an exact expansion (level 16).
    pub fn cusp_half_expansion(&self, a: usize) -> QExpansion {
        QExpansion::exact(self.k, 16, self.basis_cusp_half[a - 1].clone(), 16i128.pow(a as u32)).reduced()
    }

    /// Scalar with b_a|W₄ = w·b_{J−a}: w = 16^{J−2a}, returned as (num, den).
    pub fn w4_scalar(&self, a: usize) -> (i128, i128) {
        let e = self.j as i64 - 2 * a as i64;
        if e >= 0 {
            (16i128.pow(e as u32), 1)
        } else {
            (1, 16i128.pow((-e) as u32))
        }
    }

    /// Coordinates of an exact expansion in the basis, by triangular
    /// solve on indices 1..J−1. Returns None if the input has a nonzero
    /// constant term.
    pub fn coordinates(&self, c: &[num_rational::Ratio<i128>]) -> Option<Vec<num_rational::Ratio<i128>>> {
        use num_rational::Ratio;
        let d = self.dim();
        if c.is_empty() || *c.first()? != Ratio::from_integer(0) || c.len() <= d {
            return None;
        }
        let mut rest: Vec<Ratio<i128>> = c[..=d].to_vec();
        let mut x = vec![Ratio::from_integer(0); d];
        for a in 1..=d {
            let coef = rest[a];
            x[a - 1] = coef;
            for (i, r) in rest.iter_mut().enumerate().skip(a) {
                *r -= coef * Ratio::from_integer(self.basis[a - 1][i]);
            }
        }
        Some(x)
    }

    /// Complex coordinates of a numeric expansion (triangular solve).
    pub fn coordinates_complex(&self, c: &[num_complex::Complex64]) -> Vec<num_complex::Complex64> {
        let d = self.dim();
        let mut rest: Vec<num_complex::Complex64> = c[..=d].to_vec();
        let mut x = vec![num_complex::Complex64::default(); d];
        for a in 1..=d {
            let coef = rest[a];
            x[a - 1] = coef;
            for (i, r) in rest.iter_mut().enumerate().skip(a) {
                *r -= coef * self.basis[a - 1][i] as f64;
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_matches_schoolbook() {
        let th = coeffs_of(&qexp::theta(300));
        let ff = coeffs_of(&qexp::eis_f(300));
        let p = product_exact(&[&th, &ff, &ff], 301, false).unwrap();
        let a = ntt::convolve_exact(&th, &ff, 301).unwrap();
        let b = ntt::convolve_exact(&a, &ff, 301).unwrap();
        assert_eq!(p, b);
    }

    #[test]
    fn theta_fourth_powers_closed_form() {
        let n = 400;
        let th = coeffs_of(&qexp::theta(n - 1));
        let to = coeffs_of(&qexp::theta_odd(n - 1));
        let sig = sigma_table(n);
        let p = product_exact(&[&th, &th, &th, &th], n, false).unwrap();
        let q = product_exact(&[&to, &to, &to, &to], n, false).unwrap();
        for i in 1..n {
            let r4 = if i % 4 == 0 { 8 * sig[i] - 32 * sig[i / 4] } else { 8 * sig[i] };
            assert_eq!(p[i], r4);
            assert_eq!(q[i], if i % 8 == 4 { 16 * sig[i / 4] } else { 0 });
        }
    }

    #[test]
    fn ell6_dimension_and_shape() {
        let s = CuspSpace::new(6, 200, false).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.basis[0][1], 1);
        assert_eq!(s.basis[1][1], 0);
        assert_eq!(s.basis[1][2], 1);
        // Support of the cusp −1/2 images: n ≡ (−1)^ℓ mod 4.
        for b in &s.basis_cusp_half {
            for (n, &x) in b.iter().enumerate() {
                if n % 4 != 1 {
                    assert_eq!(x, 0, "index {n}");
                }
            }
        }
    }

    #[test]
    fn small_ell_is_zero_space() {
        assert!(matches!(CuspSpace::new(3, 50, false), Err(Error::ZeroSpace { ell: 3 })));
        assert_eq!(CuspSpace::new(4, 50, false).unwrap().dim(), 1);
    }
}
