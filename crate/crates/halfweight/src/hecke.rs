//! Hecke operators T(p²) (coefficient formula and coset definition), U₄,
//! W₄, eigenform extraction and the operator identities at p = 2.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::arith;
use crate::error::{Error, Result};
use crate::qexp::{self, Coeffs, FftInversion, QExpansion, SlashConfig};
use crate::space::CuspSpace;

type Q = Ratio<i128>;

fn check_odd_prime(p: u64) -> Result<()> {
    if p == 2 {
        return Err(Error::InvalidArgument("T(p²) needs an odd prime; use u4 at p = 2".into()));
    }
    if p < 2 || arith::factorize(p) != vec![(p, 1)] {
        return Err(Error::InvalidArgument(format!("{p} is not prime")));
    }
    Ok(())
}

fn ipow(p: u64, e: u32) -> Result<i128> {
    (p as i128)
        .checked_pow(e)
        .ok_or_else(|| Error::Overflow(format!("{p}^{e}")))
}

/// b(n) = a(p²n) + ((−1)^ℓ n / p) p^{ℓ−1} a(n) + p^{2ℓ−1} a(n/p²).
pub fn t_p2_coeff(a: &QExpansion, p: u64, ell: u32) -> Result<QExpansion> {
    check_odd_prime(p)?;
    let p2 = (p * p) as usize;
    let m = a.n_max() / p2;
    let sign = |n: usize| -> i32 {
        let x = if ell % 2 == 0 { n as i64 } else { -(n as i64) };
        arith::jacobi(x, p as i64)
    };
    let coeffs = match &a.coeffs {
        Coeffs::Exact { num, den } => {
            let c1 = ipow(p, ell - 1)?;
            let c2 = ipow(p, 2 * ell - 1)?;
            let out = (0..=m)
                .map(|n| {
                    let mid = num[n]
                        .checked_mul(c1 * sign(n) as i128)
                        .ok_or_else(|| Error::Overflow("T(p²)".into()))?;
                    let low = if n % p2 == 0 {
                        num[n / p2]
                            .checked_mul(c2)
                            .ok_or_else(|| Error::Overflow("T(p²)".into()))?
                    } else {
                        0
                    };
                    num[p2 * n]
                        .checked_add(mid)
                        .and_then(|x| x.checked_add(low))
                        .ok_or_else(|| Error::Overflow("T(p²)".into()))
                })
                .collect::<Result<Vec<_>>>()?;
            Coeffs::Exact { num: out, den: *den }
        }
        Coeffs::Numeric(c) => {
            let c1 = (p as f64).powi(ell as i32 - 1);
            let c2 = (p as f64).powi(2 * ell as i32 - 1);
            Coeffs::Numeric(
                (0..=m)
                    .map(|n| {
                        let low = if n % p2 == 0 { c[n / p2] * c2 } else { Complex64::default() };
                        c[p2 * n] + c[n] * (c1 * sign(n) as f64) + low
                    })
                    .collect(),
            )
        }
    };
    Ok(QExpansion { coeffs, ..a.clone() })
}

/// T(p²)f sampled through its p² + p cosets and FFT-inverted:
/// p^{ℓ−3/2}{Σ_b p^{−(ℓ+1/2)} f((z+b)/p²) + Σ_h ε_p^{2ℓ+1}(−h/p) f(z+h/p) + p^{ℓ+1/2} f(p²z)}.
pub fn t_p2_coset(f: &QExpansion, p: u64, ell: u32, n_out: usize, parallel: bool) -> Result<FftInversion> {
    check_odd_prime(p)?;
    let k = 2 * ell + 1;
    let p2 = (p * p) as f64;
    let y = qexp::auto_height(n_out, k);
    let m = qexp::auto_samples(n_out, y);
    let c = qexp::sampling_coeffs(f, y / p2)?;
    let pf = p as f64;
    let outer = pf.powf(ell as f64 - 1.5);
    let w_alpha = pf.powf(-(ell as f64 + 0.5));
    let w_sigma = pf.powf(ell as f64 + 0.5);
    let eps_k = arith::eps(p as i64)?.powu(k);
    let mid: Vec<(f64, Complex64)> = (1..p)
        .map(|h| {
            let s = arith::jacobi(-(h as i64), p as i64) as f64;
            (h as f64 / pf, eps_k * s)
        })
        .collect();
    let sampler = |z: Complex64| -> Result<Complex64> {
        let mut s = Complex64::default();
        for b in 0..p * p {
            s += qexp::eval_series(&c, 0.0, (z + b as f64) / p2) * w_alpha;
        }
        for &(shift, w) in &mid {
            s += qexp::eval_series(&c, 0.0, z + shift) * w;
        }
        s += qexp::eval_series(&c, 0.0, z * p2) * w_sigma;
        Ok(s * outer)
    };
    let mut inv = qexp::fft_invert(sampler, m, y, n_out, 0.0, parallel)?;
    inv.expansion.half_weight_numerator = k;
    inv.expansion.level = f.level;
    Ok(inv)
}

/// (f|U₄)(n) = a(4n).
pub fn u4(a: &QExpansion) -> QExpansion {
    a.u4()
}

/// f|W₄ = (−2iz)^{−(ℓ+1/2)} f(−1/(4z)), numerically.
pub fn w4(f: &QExpansion, n_out: usize, parallel: bool) -> Result<FftInversion> {
    qexp::slash_w4_numeric(f, SlashConfig { n_out, parallel })
}

/// Square matrix over Q; column j holds the coordinates of op(b_{j+1}).
pub type QMatrix = Vec<Vec<Q>>;

fn exact_coords(space: &CuspSpace, e: &QExpansion) -> Result<Vec<Q>> {
    let n = e.len();
    let c: Vec<Q> = (0..n).map(|i| e.coeff_exact(i).unwrap()).collect();
    let x = space
        .coordinates(&c)
        .ok_or_else(|| Error::Invariant("operator image has a constant term".into()))?;
    // The image must lie in the span on every available index.
    for (i, ci) in c.iter().enumerate() {
        let mut s = Q::from_integer(0);
        for (a, xa) in x.iter().enumerate() {
            s += *xa * Q::from_integer(space.basis[a][i]);
        }
        if s != *ci {
            return Err(Error::Invariant(format!("operator image leaves the cusp space at index {i}")));
        }
    }
    Ok(x)
}

fn operator_matrix<F>(space: &CuspSpace, op: F) -> Result<QMatrix>
where
    F: Fn(&QExpansion) -> Result<QExpansion>,
{
    let d = space.dim();
    let mut m = vec![vec![Q::from_integer(0); d]; d];
    for j in 0..d {
        let img = op(&space.basis_expansion(j + 1))?;
        let x = exact_coords(space, &img)?;
        for i in 0..d {
            m[i][j] = x[i];
        }
    }
    Ok(m)
}

/// Exact matrix of T(p²) on the basis.
pub fn hecke_matrix(space: &CuspSpace, p: u64) -> Result<QMatrix> {
    let need = (p * p) as usize * (space.dim() + 1);
    if space.n_max < need {
        return Err(Error::TableTooShort { have: space.n_max, need });
    }
    let cut = space.n_max.min(need * 4);
    operator_matrix(space, |b| t_p2_coeff(&b.truncate(cut), p, space.ell))
}

/// Exact matrix of U₄ on the basis.
pub fn u4_matrix(space: &CuspSpace) -> Result<QMatrix> {
    let need = 4 * (space.dim() + 1);
    if space.n_max < need {
        return Err(Error::TableTooShort { have: space.n_max, need });
    }
    let cut = space.n_max.min(need * 16);
    operator_matrix(space, |b| Ok(b.truncate(cut).u4()))
}

/// Exact matrix of W₄: b_a ↦ 16^{J−2a} b_{J−a}.
pub fn w4_matrix(space: &CuspSpace) -> QMatrix {
    let d = space.dim();
    let mut m = vec![vec![Q::from_integer(0); d]; d];
    for a in 1..=d {
        let (n, q) = space.w4_scalar(a);
        m[space.j as usize - a - 1][a - 1] = Q::new(n, q);
    }
    m
}

pub fn qmat_mul(a: &QMatrix, b: &QMatrix) -> QMatrix {
    let d = a.len();
    let mut c = vec![vec![Q::from_integer(0); d]; d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

fn to_f64(m: &QMatrix) -> DMatrix<f64> {
    let d = m.len();
    DMatrix::from_fn(d, d, |i, j| *m[i][j].numer() as f64 / *m[i][j].denom() as f64)
}

fn to_c64(m: &QMatrix) -> DMatrix<Complex64> {
    to_f64(m).map(|x| Complex64::new(x, 0.0))
}

/// A complete Hecke eigenform with its cusp companions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenformBundle {
    pub ell: u32,
    pub n_max: usize,
    /// ω_p with T(p²)f = ω_p p^{(2ℓ−1)/2} f.
    pub omega: BTreeMap<u64, f64>,
    /// Eigenvalue of U₄ = T(2²).
    pub c4: Complex64,
    pub niwa_mu: i64,
    /// Coordinates of f in the basis b_1, …, b_{J−1}.
    pub coords: Vec<Complex64>,
    /// Normalized coefficients of f at ∞, indices 0..=n_max (index 0 unused).
    pub lambda_f: Vec<Complex64>,
    /// Normalized coefficients of 𝔤 = 2^{ℓ+1/2} f|[ρ_{−1/2}](4z).
    pub lambda_g: Vec<Complex64>,
    /// Normalized coefficients of 𝔥 = f|W₄.
    pub lambda_h: Vec<Complex64>,
}

/// Which coefficient sequence of the bundle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    F,
    G,
    H,
}

impl EigenformBundle {
    /// κ' = ℓ/2 − 1/4.
    pub fn kappa(&self) -> f64 {
        self.ell as f64 / 2.0 - 0.25
    }

    pub fn lambda(&self, fam: Family) -> &[Complex64] {
        match fam {
            Family::F => &self.lambda_f,
            Family::G => &self.lambda_g,
            Family::H => &self.lambda_h,
        }
    }

    /// Unnormalized coefficients a(n) = λ(n) n^{ℓ/2−1/4}.
    pub fn unnormalized(&self, fam: Family) -> Vec<Complex64> {
        let k = self.kappa();
        self.lambda(fam)
            .iter()
            .enumerate()
            .map(|(n, &l)| if n == 0 { l } else { l * (n as f64).powf(k) })
            .collect()
    }

    pub fn expansion(&self, fam: Family) -> QExpansion {
        let level = if fam == Family::G { 16 } else { 4 };
        QExpansion::numeric(2 * self.ell + 1, level, self.unnormalized(fam))
    }

    /// Hecke eigenvalue ω_p p^{ℓ−1/2} in unnormalized coefficients.
    pub fn hecke_eigenvalue(&self, p: u64) -> Option<f64> {
        self.omega
            .get(&p)
            .map(|w| w * (p as f64).powf(self.ell as f64 - 0.5))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Copy truncated to n_max.
    pub fn truncated(&self, n_max: usize) -> Self {
        let cut = |v: &Vec<Complex64>| v[..(n_max + 1).min(v.len())].to_vec();
        EigenformBundle {
            n_max: n_max.min(self.n_max),
            lambda_f: cut(&self.lambda_f),
            lambda_g: cut(&self.lambda_g),
            lambda_h: cut(&self.lambda_h),
            ..self.clone()
        }
    }
}

/// μ = (−1)^{ℓ(ℓ+1)/2} 2^{ℓ−1}.
pub fn niwa_mu(ell: u32) -> i64 {
    let s = if (ell * (ell + 1) / 2) % 2 == 0 { 1 } else { -1 };
    s * (1i64 << (ell - 1))
}

/// Solve (A − λI)x = 0 for a simple eigenvalue by inverse iteration.
fn eigenvector(a: &DMatrix<Complex64>, lambda: Complex64) -> Result<Vec<Complex64>> {
    let d = a.nrows();
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let shift = lambda + Complex64::new(scale * 1e-10, scale * 1e-10);
    let m = a - DMatrix::<Complex64>::identity(d, d) * shift;
    let lu = m.lu();
    let mut x = nalgebra::DVector::from_fn(d, |i, _| Complex64::new(1.0 + i as f64 * 0.37, 0.1 * i as f64));
    for _ in 0..6 {
        x = lu
            .solve(&x)
            .ok_or_else(|| Error::Eigen("singular shifted matrix".into()))?;
        let n = x.norm();
        x /= Complex64::new(n, 0.0);
    }
    Ok(x.iter().copied().collect())
}

fn matvec(m: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    let x = nalgebra::DVector::from_column_slice(v);
    (m * x).iter().copied().collect()
}

fn eigenvalue_of(m: &DMatrix<Complex64>, v: &[Complex64]) -> (Complex64, f64) {
    let mv = matvec(m, v);
    let i = (0..v.len())
        .max_by(|&a, &b| v[a].norm().partial_cmp(&v[b].norm()).unwrap())
        .unwrap();
    let e = mv[i] / v[i];
    let res = mv
        .iter()
        .zip(v)
        .map(|(a, b)| (a - e * b).norm())
        .fold(0.0, f64::max);
    let scale = mv.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    (e, res / scale.max(e.norm() * 1e-300))
}

/// Exact operator matrices used for eigen-extraction.
#[derive(Clone, Debug)]
pub struct OperatorMatrices {
    pub hecke: BTreeMap<u64, QMatrix>,
    pub u4: QMatrix,
    pub w4: QMatrix,
}

impl OperatorMatrices {
    pub fn new(space: &CuspSpace, primes: &[u64]) -> Result<Self> {
        let mut hecke = BTreeMap::new();
        for &p in primes {
            hecke.insert(p, hecke_matrix(space, p)?);
        }
        Ok(OperatorMatrices {
            hecke,
            u4: u4_matrix(space)?,
            w4: w4_matrix(space),
        })
    }
}

/// All eigenforms of the cusp space, ordered by decreasing Im c₄ then
/// increasing Re c₄; each normalized to leading coefficient 1.
pub fn extract_all(space: &CuspSpace, primes: &[u64]) -> Result<Vec<EigenformBundle>> {
    let d = space.dim();
    if d == 0 {
        return Err(Error::ZeroSpace { ell: space.ell });
    }
    let mats = OperatorMatrices::new(space, primes)?;
    let ell = space.ell;
    // A generic real combination of commuting operators with simple spectrum.
    let mut ar = to_f64(&mats.u4);
    for (i, (&p, m)) in mats.hecke.iter().enumerate() {
        let w = 1.0 / ((p as f64).powf(ell as f64 - 0.5) * (1.0 + 0.618 * i as f64 + p as f64));
        ar += to_f64(m) * w;
    }
    let spec: Vec<Complex64> = ar.clone().complex_eigenvalues().iter().copied().collect();
    let a = ar.map(|x| Complex64::new(x, 0.0));
    let scale = spec.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    for i in 0..d {
        for j in 0..i {
            if (spec[i] - spec[j]).norm() < 1e-9 * scale {
                return Err(Error::Eigen("repeated eigenvalue of the combined operator".into()));
            }
        }
    }
    let u4c = to_c64(&mats.u4);
    let hecke_c: BTreeMap<u64, DMatrix<Complex64>> = mats.hecke.iter().map(|(&p, m)| (p, to_c64(m))).collect();
    let mut out = Vec::new();
    for lam in spec.iter() {
        let mut v = eigenvector(&a, *lam)?;
        let lead = v
            .iter()
            .position(|z| z.norm() > 1e-8 * v.iter().map(|w| w.norm()).fold(0.0, f64::max))
            .unwrap();
        let l0 = v[lead];
        for z in v.iter_mut() {
            *z /= l0;
        }
        let (c4, r4) = eigenvalue_of(&u4c, &v);
        if r4 > 1e-9 {
            return Err(Error::Eigen(format!("U4 eigen-residual {r4:.2e}")));
        }
        let mut omega = BTreeMap::new();
        for (&p, m) in &hecke_c {
            let (e, r) = eigenvalue_of(m, &v);
            if r > 1e-9 || e.im.abs() > 1e-9 * e.norm().max(1.0) {
                return Err(Error::Eigen(format!("T({p}²) eigen-residual {r:.2e}")));
            }
            omega.insert(p, e.re / (p as f64).powf(ell as f64 - 0.5));
        }
        if c4.norm() < 1e-12 {
            return Err(Error::Invariant("U4 eigenvalue c = 0 contradicts the Niwa relation".into()));
        }
        out.push(build_bundle(space, v, omega, c4));
    }
    out.sort_by(|x, y| {
        (-x.c4.im, x.c4.re)
            .partial_cmp(&(-y.c4.im, y.c4.re))
            .unwrap()
    });
    Ok(out)
}

fn build_bundle(space: &CuspSpace, v: Vec<Complex64>, omega: BTreeMap<u64, f64>, c4: Complex64) -> EigenformBundle {
    let ell = space.ell;
    let n = space.n_max + 1;
    let kappa = ell as f64 / 2.0 - 0.25;
    let jj = space.j as usize;
    let g_scale = 2f64.powf(ell as f64 + 0.5);
    let mut af = vec![Complex64::default(); n];
    let mut ag = vec![Complex64::default(); n];
    let mut ah = vec![Complex64::default(); n];
    for (a, va) in v.iter().enumerate() {
        let a1 = a + 1;
        let (wn, wd) = space.w4_scalar(a1);
        let wh = *va * (wn as f64 / wd as f64);
        let wg = *va * (g_scale / 16f64.powi(a1 as i32));
        let b = &space.basis[a];
        let bh = &space.basis[jj - a1 - 1];
        let bg = &space.basis_cusp_half[a];
        for i in 0..n {
            af[i] += *va * b[i] as f64;
            ah[i] += wh * bh[i] as f64;
            ag[i] += wg * bg[i] as f64;
        }
    }
    let norm = |v: Vec<Complex64>| -> Vec<Complex64> {
        v.into_iter()
            .enumerate()
            .map(|(i, z)| if i == 0 { z } else { z * (i as f64).powf(-kappa) })
            .collect()
    };
    EigenformBundle {
        ell,
        n_max: space.n_max,
        omega,
        c4,
        niwa_mu: niwa_mu(ell),
        coords: v,
        lambda_f: norm(af),
        lambda_g: norm(ag),
        lambda_h: norm(ah),
    }
}

/// Default eigenform: the first of [`extract_all`] (Im c₄ > 0 when the
/// U₄-eigenvalues are not real).
pub fn extract_eigenform(ell: u32, primes: &[u64], n_max: usize, parallel: bool) -> Result<EigenformBundle> {
    let need = primes.iter().map(|&p| (p * p) as usize * 8).max().unwrap_or(0).max(64);
    let space = CuspSpace::new(ell, n_max.max(need), parallel)?;
    let mut all = extract_all(&space, primes)?;
    let b = all.remove(0);
    let b = b.truncated(n_max);
    for p in primes.iter().copied().filter(|&p| p == 3 || p == 5) {
        let r = companion_residuals(&b, p)?;
        if r.max_residual() > 1e-6 || r.max_eigen_mismatch() > 1e-8 {
            return Err(Error::Invariant(format!("cusp companions fail the T({p}²) eigen-check: {r:?}")));
        }
    }
    Ok(b)
}

/// Relative sup-norm residual ‖x − y‖∞ / max(‖y‖∞, 1e−12).
pub fn residual(x: &[Complex64], y: &[Complex64]) -> f64 {
    let n = x.len().min(y.len());
    let num = (0..n).map(|i| (x[i] - y[i]).norm()).fold(0.0, f64::max);
    let den = y[..n].iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-12);
    num / den
}

/// T(p²)-eigen residuals of f, 𝔤, 𝔥 and the eigenvalues they imply.
#[derive(Clone, Debug, Serialize)]
pub struct CompanionEigen {
    pub p: u64,
    pub eig_f: f64,
    pub residual_f: f64,
    pub residual_g: f64,
    pub residual_h: f64,
    pub eig_g: Complex64,
    pub eig_h: Complex64,
}

impl CompanionEigen {
    pub fn max_residual(&self) -> f64 {
        self.residual_f.max(self.residual_g).max(self.residual_h)
    }

    pub fn max_eigen_mismatch(&self) -> f64 {
        let e = Complex64::new(self.eig_f, 0.0);
        ((self.eig_g - e).norm() / self.eig_f.abs()).max((self.eig_h - e).norm() / self.eig_f.abs())
    }
}

fn dominant_ratio(t: &[Complex64], a: &[Complex64]) -> Complex64 {
    let i = (1..t.len().min(a.len()))
        .max_by(|&x, &y| a[x].norm().partial_cmp(&a[y].norm()).unwrap())
        .unwrap_or(1);
    t[i] / a[i]
}

pub fn companion_residuals(b: &EigenformBundle, p: u64) -> Result<CompanionEigen> {
    let eig = b
        .hecke_eigenvalue(p)
        .ok_or_else(|| Error::InvalidArgument(format!("bundle has no eigenvalue at p = {p}")))?;
    let mut res = [0.0; 3];
    let mut eigs = [Complex64::default(); 3];
    for (i, fam) in [Family::F, Family::G, Family::H].into_iter().enumerate() {
        let e = b.expansion(fam);
        let t = t_p2_coeff(&e, p, b.ell)?.to_complex();
        let a: Vec<Complex64> = e.to_complex()[..t.len()].to_vec();
        let scaled: Vec<Complex64> = a.iter().map(|z| z * eig).collect();
        res[i] = residual(&t, &scaled);
        eigs[i] = dominant_ratio(&t, &a);
    }
    Ok(CompanionEigen {
        p,
        eig_f: eig,
        residual_f: res[0],
        residual_g: res[1],
        residual_h: res[2],
        eig_g: eigs[1],
        eig_h: eigs[2],
    })
}

/// Results of the operator identities at p = 2.
#[derive(Clone, Debug, Serialize)]
pub struct NiwaReport {
    pub mu: i64,
    pub c4: Complex64,
    /// max |U₄W₄U₄W₄ − μU₄W₄ − 2μ²| with exact matrices.
    pub quartic_exact: f64,
    /// Same relation with W₄ computed by the numerical slash pipeline, relative to 2μ².
    pub quartic_numeric: f64,
    /// 𝔥|U₄ − μf − (2μ²/c)𝔥 on stored coefficients.
    pub h_u4_residual: f64,
    /// Same identity with 𝔥 from the numerical W₄ pipeline, n ≤ 100.
    pub h_u4_numeric: f64,
    /// ‖𝔤|U₄‖ relative to ‖𝔤‖ from stored coefficients and from the numerical pipeline.
    pub g_u4_exact: f64,
    pub g_u4_numeric: f64,
    /// Stored 𝔤 versus the numerical ρ_{−1/2} pipeline.
    pub g_pipeline: f64,
    /// W₄ applied numerically to f (against 𝔥) and to 𝔥 (against f).
    pub w4_f_to_h: f64,
    pub w4_h_to_f: f64,
    /// 1 if c² ≠ 2μ², else 2.
    pub case: u8,
    pub case_residual: f64,
    /// Fitted constants C in |λ(tr²)| ≤ C(|λ(t)| + |λ_f(t)|)τ(r)² for f, 𝔤, 𝔥.
    pub reduction_constants: [f64; 3],
}

impl NiwaReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.quartic_exact == 0.0
            && self.quartic_numeric < tol
            && self.h_u4_residual < tol
            && self.h_u4_numeric < tol
            && self.g_u4_exact < 1e-7
            && self.g_u4_numeric < 1e-7
            && self.w4_f_to_h < tol
            && self.w4_h_to_f < tol
            && self.case_residual < tol
    }
}

fn combo(space: &CuspSpace, v: &[Complex64], n: usize) -> QExpansion {
    let mut c = vec![Complex64::default(); n + 1];
    for (a, va) in v.iter().enumerate() {
        for (i, ci) in c.iter_mut().enumerate() {
            *ci += *va * space.basis[a][i] as f64;
        }
    }
    QExpansion::numeric(space.k, 4, c)
}

/// Check the p = 2 identities for a bundle extracted from `space`.
pub fn verify_niwa(space: &CuspSpace, b: &EigenformBundle, parallel: bool) -> Result<NiwaReport> {
    let mu = b.niwa_mu;
    let c = b.c4;
    if c.norm() == 0.0 {
        return Err(Error::Invariant("c4 = 0".into()));
    }
    let d = space.dim();
    let um = u4_matrix(space)?;
    let wm = w4_matrix(space);
    let uw = qmat_mul(&um, &wm);
    let uwuw = qmat_mul(&uw, &uw);
    let mut quartic_exact = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let mut r = uwuw[i][j] - uw[i][j] * Q::from_integer(mu as i128);
            if i == j {
                r -= Q::from_integer(2 * (mu as i128) * (mu as i128));
            }
            quartic_exact = quartic_exact.max((*r.numer() as f64 / *r.denom() as f64).abs());
        }
    }
    // Numerical W₄ on each basis vector, read back by triangular solve.
    let n_check = 100;
    let mut wnum = DMatrix::<Complex64>::zeros(d, d);
    for a in 1..=d {
        let inv = w4(&space.basis_expansion(a), d + 2, parallel)?;
        let x = space.coordinates_complex(&inv.expansion.to_complex());
        for i in 0..d {
            wnum[(i, a - 1)] = x[i];
        }
    }
    let unum = to_c64(&um);
    let uwn = &unum * &wnum;
    let rel = &uwn * &uwn - &uwn * Complex64::new(mu as f64, 0.0)
        - DMatrix::<Complex64>::identity(d, d) * Complex64::new(2.0 * (mu * mu) as f64, 0.0);
    let quartic_numeric = rel.iter().map(|z| z.norm()).fold(0.0, f64::max) / (2.0 * (mu * mu) as f64);

    let af = b.unnormalized(Family::F);
    let ah = b.unnormalized(Family::H);
    let ag = b.unnormalized(Family::G);
    let beta = 2.0 * (mu * mu) as f64 / c;
    let m4 = b.n_max / 4;
    let lhs: Vec<Complex64> = (1..=m4).map(|n| ah[4 * n]).collect();
    let rhs: Vec<Complex64> = (1..=m4).map(|n| af[n] * mu as f64 + beta * ah[n]).collect();
    let h_u4_residual = residual(&lhs, &rhs);

    let g_u4: Vec<Complex64> = (1..=m4).map(|n| ag[4 * n]).collect();
    let g_u4_exact = g_u4.iter().map(|z| z.norm()).fold(0.0, f64::max)
        / ag.iter().map(|z| z.norm()).fold(1e-300, f64::max);

    let f_exp = combo(space, &b.coords, space.n_max);
    let h_num = w4(&f_exp, 4 * n_check, parallel)?.expansion.to_complex();
    let w4_f_to_h = residual(&h_num[1..=n_check], &ah[1..=n_check]);
    let lhs: Vec<Complex64> = (1..=n_check).map(|n| h_num[4 * n]).collect();
    let rhs: Vec<Complex64> = (1..=n_check).map(|n| af[n] * mu as f64 + beta * h_num[n]).collect();
    let h_u4_numeric = residual(&lhs, &rhs);

    let h_exp = QExpansion::numeric(space.k, 4, {
        let mut hv = vec![Complex64::default(); space.n_max + 1];
        for (a, va) in b.coords.iter().enumerate() {
            let (wn, wd) = space.w4_scalar(a + 1);
            let bh = &space.basis[space.j as usize - a - 2];
            for (i, x) in hv.iter_mut().enumerate() {
                *x += *va * (wn as f64 / wd as f64) * bh[i] as f64;
            }
        }
        hv
    });
    let f_back = w4(&h_exp, n_check, parallel)?.expansion.to_complex();
    let w4_h_to_f = residual(&f_back[1..=n_check], &af[1..=n_check]);

    let g_num = qexp::slash_rho_half_numeric(&f_exp, SlashConfig { n_out: 4 * n_check, parallel })?
        .expansion
        .to_complex();
    let g_pipeline = residual(&g_num[1..=4 * n_check], &ag[1..=4 * n_check]);
    let g_u4_numeric = (1..=n_check).map(|n| g_num[4 * n].norm()).fold(0.0, f64::max)
        / g_num[1..=4 * n_check].iter().map(|z| z.norm()).fold(1e-300, f64::max);

    let two_mu2 = 2.0 * (mu * mu) as f64;
    let (case, case_residual) = if (c * c - two_mu2).norm() > 1e-9 * two_mu2 {
        let alpha = c * mu as f64 / (two_mu2 - c * c);
        let hh: Vec<Complex64> = (0..=b.n_max).map(|n| ah[n] + alpha * af[n]).collect();
        let lhs: Vec<Complex64> = (1..=m4).map(|n| hh[4 * n]).collect();
        let rhs: Vec<Complex64> = (1..=m4).map(|n| hh[n] * beta).collect();
        (1, residual(&lhs, &rhs))
    } else {
        let lhs: Vec<Complex64> = (1..=m4).map(|n| ah[4 * n]).collect();
        let rhs: Vec<Complex64> = (1..=m4).map(|n| af[n] * mu as f64 + c * ah[n]).collect();
        (2, residual(&lhs, &rhs))
    };

    let mut consts = [0.0; 3];
    for (i, fam) in [Family::F, Family::G, Family::H].into_iter().enumerate() {
        consts[i] = reduction_constant(b.lambda(fam), &b.lambda_f);
    }
    Ok(NiwaReport {
        mu,
        c4: c,
        quartic_exact,
        quartic_numeric,
        h_u4_residual,
        h_u4_numeric,
        g_u4_exact,
        g_u4_numeric,
        g_pipeline,
        w4_f_to_h,
        w4_h_to_f,
        case,
        case_residual,
        reduction_constants: consts,
    })
}

/// max over m = t r² of |λ(m)| / ((|λ(t)| + |λ_f(t)|) τ(r)²), skipping m
/// where the denominator vanishes.
pub fn reduction_constant(lam: &[Complex64], lam_f: &[Complex64]) -> f64 {
    let mut worst = 0.0f64;
    for m in 1..lam.len().min(lam_f.len()) {
        let sp = arith::squarefree_split(m as u64).expect("m >= 1");
        let den = (lam[sp.t as usize].norm() + lam_f[sp.t as usize].norm())
            * (arith::divisor_count(sp.n).unwrap_or(1) as f64).powi(2);
        if den > 1e-12 {
            worst = worst.max(lam[m].norm() / den);
        }
    }
    worst
}
