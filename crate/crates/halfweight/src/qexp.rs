//! Truncated q-expansions: exact integer/rational or complex coefficients,
//! ring operations, point evaluation, FFT coefficient recovery and the
//! numerical slash pipelines for the cusps 0 and −1/2.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::Ratio;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ntt;
use crate::par;

/// Coefficient storage. Exact series keep integer numerators over one
/// common positive denominator.
#[derive(Clone, Debug, PartialEq)]
pub enum Coeffs {
    Exact { num: Vec<i128>, den: i128 },
    Numeric(Vec<Complex64>),
}

/// A truncated Fourier series Σ_{n ≤ n_max} a(n) e((n + offset) z).
#[derive(Clone, Debug, PartialEq)]
pub struct QExpansion {
    /// 2·weight (odd for half-integral weight; 2ℓ+1 for weight ℓ+1/2).
    pub half_weight_numerator: u32,
    pub level: u32,
    pub offset: Ratio<i64>,
    pub coeffs: Coeffs,
}

/// Value of a series at a point together with a truncation-error estimate.
#[derive(Clone, Copy, Debug)]
pub struct Evaluated {
    pub value: Complex64,
    pub err: f64,
}

impl QExpansion {
    pub fn exact(k: u32, level: u32, num: Vec<i128>, den: i128) -> Self {
        assert!(den > 0, "denominator must be positive");
        QExpansion {
            half_weight_numerator: k,
            level,
            offset: Ratio::from_integer(0),
            coeffs: Coeffs::Exact { num, den },
        }
    }

    pub fn numeric(k: u32, level: u32, c: Vec<Complex64>) -> Self {
        QExpansion {
            half_weight_numerator: k,
            level,
            offset: Ratio::from_integer(0),
            coeffs: Coeffs::Numeric(c),
        }
    }

    pub fn zero(k: u32, level: u32, n_max: usize) -> Self {
        Self::exact(k, level, vec![0; n_max + 1], 1)
    }

    pub fn len(&self) -> usize {
        match &self.coeffs {
            Coeffs::Exact { num, .. } => num.len(),
            Coeffs::Numeric(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_max(&self) -> usize {
        self.len().saturating_sub(1)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.coeffs, Coeffs::Exact { .. })
    }

    /// Coefficient a(n) as a complex number (zero beyond the truncation).
    pub fn coeff(&self, n: usize) -> Complex64 {
        match &self.coeffs {
            Coeffs::Exact { num, den } => num
                .get(n)
                .map(|&x| Complex64::new(x as f64 / *den as f64, 0.0))
                .unwrap_or_default(),
            Coeffs::Numeric(c) => c.get(n).copied().unwrap_or_default(),
        }
    }

    /// Exact coefficient a(n) as a reduced rational, when available.
    pub fn coeff_exact(&self, n: usize) -> Option<Ratio<i128>> {
        match &self.coeffs {
            Coeffs::Exact { num, den } => num.get(n).map(|&x| Ratio::new(x, *den)),
            Coeffs::Numeric(_) => None,
        }
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        (0..self.len()).map(|n| self.coeff(n)).collect()
    }

    pub fn as_numeric(&self) -> QExpansion {
        QExpansion {
            coeffs: Coeffs::Numeric(self.to_complex()),
            ..self.clone()
        }
    }

    pub fn truncate(&self, n_max: usize) -> QExpansion {
        let n = (n_max + 1).min(self.len());
        let coeffs = match &self.coeffs {
            Coeffs::Exact { num, den } => Coeffs::Exact {
                num: num[..n].to_vec(),
                den: *den,
            },
            Coeffs::Numeric(c) => Coeffs::Numeric(c[..n].to_vec()),
        };
        QExpansion {
            coeffs,
            ..self.clone()
        }
    }

    /// Normalized coefficients λ(n) = a(n)·n^{−(k−1)/4}; index 0 is zero.
    pub fn normalized(&self) -> Vec<Complex64> {
        let e = (self.half_weight_numerator as f64 - 1.0) / 4.0;
        (0..self.len())
            .map(|n| {
                if n == 0 {
                    Complex64::default()
                } else {
                    self.coeff(n) * (n as f64).powf(-e)
                }
            })
            .collect()
    }

    pub fn scale(&self, c: Complex64) -> QExpansion {
        QExpansion {
            coeffs: Coeffs::Numeric(self.to_complex().into_iter().map(|x| x * c).collect()),
            ..self.clone()
        }
    }

    /// Exact rational scaling p/q.
    pub fn scale_exact(&self, p: i128, q: i128) -> Result<QExpansion> {
        match &self.coeffs {
            Coeffs::Exact { num, den } => {
                let (p, q) = if q < 0 { (-p, -q) } else { (p, q) };
                let den = den
                    .checked_mul(q)
                    .ok_or_else(|| Error::Overflow("denominator".into()))?;
                let num = num
                    .iter()
                    .map(|&x| x.checked_mul(p).ok_or_else(|| Error::Overflow("scale".into())))
                    .collect::<Result<Vec<_>>>()?;
                Ok(QExpansion::exact(self.half_weight_numerator, self.level, num, den).reduced())
            }
            Coeffs::Numeric(_) => Ok(self.scale(Complex64::new(p as f64 / q as f64, 0.0))),
        }
    }

    /// Divide numerators and denominator by their common gcd.
    pub fn reduced(mut self) -> QExpansion {
        if let Coeffs::Exact { num, den } = &mut self.coeffs {
            let mut g = den.unsigned_abs();
            for &x in num.iter() {
                g = gcd_u128(g, x.unsigned_abs());
                if g == 1 {
                    break;
                }
            }
            if g > 1 {
                let g = g as i128;
                for x in num.iter_mut() {
                    *x /= g;
                }
                *den /= g;
            }
        }
        self
    }

    /// Sum of two expansions of the same weight; truncation to the shorter.
    pub fn add(&self, other: &QExpansion) -> Result<QExpansion> {
        if self.half_weight_numerator != other.half_weight_numerator || self.offset != other.offset {
            return Err(Error::InvalidArgument("adding expansions of different weight or offset".into()));
        }
        let n = self.len().min(other.len());
        let level = lcm(self.level, other.level);
        match (&self.coeffs, &other.coeffs) {
            (Coeffs::Exact { num: a, den: da }, Coeffs::Exact { num: b, den: db }) => {
                let den = da
                    .checked_mul(*db)
                    .ok_or_else(|| Error::Overflow("denominator".into()))?;
                let num = (0..n)
                    .map(|i| {
                        a[i].checked_mul(*db)
                            .zip(b[i].checked_mul(*da))
                            .and_then(|(x, y)| x.checked_add(y))
                            .ok_or_else(|| Error::Overflow("add".into()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mut out = QExpansion::exact(self.half_weight_numerator, level, num, den).reduced();
                out.offset = self.offset;
                Ok(out)
            }
            _ => {
                let c = (0..n).map(|i| self.coeff(i) + other.coeff(i)).collect();
                let mut out = QExpansion::numeric(self.half_weight_numerator, level, c);
                out.offset = self.offset;
                Ok(out)
            }
        }
    }

    pub fn sub(&self, other: &QExpansion) -> Result<QExpansion> {
        self.add(&other.scale_exact(-1, 1)?)
    }

    /// Cauchy product truncated at the shorter n_max; exact when both are.
    pub fn mul(&self, other: &QExpansion) -> Result<QExpansion> {
        if self.offset != Ratio::from_integer(0) || other.offset != Ratio::from_integer(0) {
            return Err(Error::InvalidArgument("products of offset expansions are not supported".into()));
        }
        let n = self.len().min(other.len());
        let k = self.half_weight_numerator + other.half_weight_numerator;
        let level = lcm(self.level, other.level);
        match (&self.coeffs, &other.coeffs) {
            (Coeffs::Exact { num: a, den: da }, Coeffs::Exact { num: b, den: db }) => {
                let num = ntt::convolve_exact(&a[..n], &b[..n], n)?;
                let den = da
                    .checked_mul(*db)
                    .ok_or_else(|| Error::Overflow("denominator".into()))?;
                Ok(QExpansion::exact(k, level, num, den).reduced())
            }
            _ => {
                let a = self.to_complex();
                let b = other.to_complex();
                Ok(QExpansion::numeric(k, level, convolve_complex(&a[..n], &b[..n], n)))
            }
        }
    }

    pub fn pow(&self, e: u32) -> Result<QExpansion> {
        let n = self.n_max();
        let mut result = one(n);
        result.level = self.level;
        if !self.is_exact() {
            result = result.as_numeric();
        }
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        result.half_weight_numerator = self.half_weight_numerator * e_total(self, &result);
        Ok(result)
    }

    /// Point evaluation with a tail estimate; fails when the estimate
    /// exceeds `tol`.
    pub fn evaluate(&self, z: Complex64, tol: f64) -> Result<Evaluated> {
        let c = self.to_complex();
        eval_checked(&c, *self.offset.numer() as f64 / *self.offset.denom() as f64, self.half_weight_numerator, z, tol)
    }

    /// (f|U₄)(z) = Σ a(4n) e(nz).
    pub fn u4(&self) -> QExpansion {
        let n = self.n_max() / 4;
        let coeffs = match &self.coeffs {
            Coeffs::Exact { num, den } => Coeffs::Exact {
                num: (0..=n).map(|i| num[4 * i]).collect(),
                den: *den,
            },
            Coeffs::Numeric(c) => Coeffs::Numeric((0..=n).map(|i| c[4 * i]).collect()),
        };
        QExpansion {
            coeffs,
            ..self.clone()
        }
    }

    /// Serialize to the JSON interchange format.
    pub fn to_json(&self, ell: Option<u32>) -> serde_json::Value {
        let coeffs: Vec<serde_json::Value> = match &self.coeffs {
            Coeffs::Exact { num, den } => num
                .iter()
                .map(|&x| {
                    let r = Ratio::new(x, *den);
                    serde_json::Value::String(format!("{}/{}", r.numer(), r.denom()))
                })
                .collect(),
            Coeffs::Numeric(c) => c.iter().map(|z| serde_json::json!([z.re, z.im])).collect(),
        };
        serde_json::json!({
            "ell": ell.unwrap_or((self.half_weight_numerator.saturating_sub(1)) / 2),
            "half_weight_numerator": self.half_weight_numerator,
            "level": self.level,
            "n_max": self.n_max(),
            "offset": format!("{}/{}", self.offset.numer(), self.offset.denom()),
            "coeffs": coeffs,
            "exact": self.is_exact(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<QExpansion> {
        let raw: RawExpansion = serde_json::from_value(v.clone())?;
        let k = raw.half_weight_numerator.unwrap_or(2 * raw.ell + 1);
        let offset = parse_ratio(&raw.offset.unwrap_or_else(|| "0/1".into()))?;
        let offset = Ratio::new(*offset.numer() as i64, *offset.denom() as i64);
        let mut q = if raw.exact {
            let rs = raw
                .coeffs
                .iter()
                .map(|c| match c {
                    serde_json::Value::String(s) => parse_ratio(s),
                    other => Err(Error::InvalidArgument(format!("expected rational string, got {other}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let mut den: i128 = 1;
            for r in &rs {
                den = lcm_i128(den, *r.denom())?;
            }
            let num = rs.iter().map(|r| r.numer() * (den / r.denom())).collect();
            QExpansion::exact(k, raw.level, num, den)
        } else {
            let c = raw
                .coeffs
                .iter()
                .map(|c| {
                    let pair: [f64; 2] = serde_json::from_value(c.clone())?;
                    Ok(Complex64::new(pair[0], pair[1]))
                })
                .collect::<Result<Vec<_>>>()?;
            QExpansion::numeric(k, raw.level, c)
        };
        q.offset = offset;
        if q.n_max() != raw.n_max {
            return Err(Error::InvalidArgument("n_max does not match coefficient count".into()));
        }
        Ok(q)
    }
}

fn e_total(base: &QExpansion, result: &QExpansion) -> u32 {
    // `one` carries weight 0 and the loop adds numerators; recover the power.
    if base.half_weight_numerator == 0 {
        1
    } else {
        result.half_weight_numerator / base.half_weight_numerator
    }
}

#[derive(Deserialize, Serialize)]
struct RawExpansion {
    ell: u32,
    #[serde(default)]
    half_weight_numerator: Option<u32>,
    level: u32,
    n_max: usize,
    #[serde(default)]
    offset: Option<String>,
    coeffs: Vec<serde_json::Value>,
    exact: bool,
}

fn parse_ratio(s: &str) -> Result<Ratio<i128>> {
    let bad = || Error::InvalidArgument(format!("bad rational '{s}'"));
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (s.trim(), "1"),
    };
    let p: i128 = p.parse().map_err(|_| bad())?;
    let q: i128 = q.parse().map_err(|_| bad())?;
    if q == 0 {
        return Err(bad());
    }
    Ok(Ratio::new(p, q))
}

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn lcm(a: u32, b: u32) -> u32 {
    (a as u64 * b as u64 / crate::arith::gcd(a as u64, b as u64)) as u32
}

fn lcm_i128(a: i128, b: i128) -> Result<i128> {
    let g = gcd_u128(a.unsigned_abs(), b.unsigned_abs()) as i128;
    (a / g)
        .checked_mul(b)
        .ok_or_else(|| Error::Overflow("lcm".into()))
}

/// The constant series 1 (weight 0, level 1).
pub fn one(n_max: usize) -> QExpansion {
    let mut num = vec![0i128; n_max + 1];
    num[0] = 1;
    QExpansion::exact(0, 1, num, 1)
}

/// θ(z) = Σ_{n ∈ Z} e(n²z).
pub fn theta(n_max: usize) -> QExpansion {
    let mut num = vec![0i128; n_max + 1];
    num[0] = 1;
    let mut k = 1usize;
    while k * k <= n_max {
        num[k * k] = 2;
        k += 1;
    }
    QExpansion::exact(1, 4, num, 1)
}

/// θ_odd(z) = Σ_{n odd} e(n²z), the odd-index part of θ(z/4) rescaled:
/// exponents are the odd squares.
pub fn theta_odd(n_max: usize) -> QExpansion {
    let mut num = vec![0i128; n_max + 1];
    let mut k = 1usize;
    while k * k <= n_max {
        num[k * k] = 2;
        k += 2;
    }
    QExpansion::exact(1, 16, num, 1)
}

/// F(z) = Σ_{n odd} σ(n) e(nz), the weight-2 Eisenstein series on Γ0(4).
pub fn eis_f(n_max: usize) -> QExpansion {
    let mut num = vec![0i128; n_max + 1];
    for d in (1..=n_max).step_by(2) {
        for m in (d..=n_max).step_by(2 * d) {
            num[m] += d as i128;
        }
    }
    QExpansion::exact(4, 4, num, 1)
}

/// Complex truncated convolution (naive for short inputs, FFT otherwise).
pub fn convolve_complex(a: &[Complex64], b: &[Complex64], n_out: usize) -> Vec<Complex64> {
    let n_out = n_out.min(a.len() + b.len().saturating_sub(1));
    if a.is_empty() || b.is_empty() {
        return vec![Complex64::default(); n_out];
    }
    if a.len().min(n_out) * b.len().min(n_out) <= 1 << 16 {
        let mut c = vec![Complex64::default(); n_out];
        for (i, &x) in a.iter().enumerate().take(n_out) {
            for (j, &y) in b.iter().enumerate().take(n_out - i) {
                c[i + j] += x * y;
            }
        }
        return c;
    }
    let len = (a.len().min(n_out) + b.len().min(n_out)).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut fa = vec![Complex64::default(); len];
    let mut fb = vec![Complex64::default(); len];
    fa[..a.len().min(n_out)].copy_from_slice(&a[..a.len().min(n_out)]);
    fb[..b.len().min(n_out)].copy_from_slice(&b[..b.len().min(n_out)]);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    fa.truncate(n_out);
    for x in fa.iter_mut() {
        *x /= len as f64;
    }
    fa
}

/// e(x) = exp(2πix).
#[inline]
pub fn e(x: f64) -> Complex64 {
    let (s, c) = (2.0 * PI * x).sin_cos();
    Complex64::new(c, s)
}

/// Tail bound for Σ_{n > N} C n^w e^{−2πny}, with C fitted on the stored
/// coefficients as max_{n > N/2} |a(n)|/n^w and w = k/2.
fn tail_estimate(c: &[Complex64], k: u32, y: f64) -> f64 {
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let w = k as f64 / 2.0;
    let cst = (n / 2 + 1..=n)
        .map(|i| c[i].norm() / (i as f64).powf(w))
        .fold(0.0, f64::max);
    if cst == 0.0 {
        return 0.0;
    }
    // Sum the bound term by term until it is negligible.
    let mut total = 0.0;
    let mut m = n + 1;
    loop {
        let t = cst * (m as f64).powf(w) * (-2.0 * PI * m as f64 * y).exp();
        total += t;
        if t < total * 1e-17 || t == 0.0 || m > n + 10_000_000 {
            break;
        }
        m += 1 + (m - n) / 64;
    }
    total * (1.0 + 1.0 / (1.0 - (-2.0 * PI * y).exp()).min(1e6) / 64.0)
}

/// Σ c(n) e((n + offset) z) with fixed-order summation.
pub fn eval_series(c: &[Complex64], offset: f64, z: Complex64) -> Complex64 {
    let nz = c.iter().filter(|x| x.re != 0.0 || x.im != 0.0).count();
    let two_pi_i_z = Complex64::new(0.0, 2.0 * PI) * z;
    if nz * 8 < c.len() {
        let mut s = Complex64::default();
        for (n, &a) in c.iter().enumerate() {
            if a.re != 0.0 || a.im != 0.0 {
                s += a * (two_pi_i_z * (n as f64 + offset)).exp();
            }
        }
        return s;
    }
    let q = two_pi_i_z.exp();
    let mut s = Complex64::default();
    let mut qn = (two_pi_i_z * offset).exp();
    for (n, &a) in c.iter().enumerate() {
        if n % 64 == 0 {
            qn = (two_pi_i_z * (n as f64 + offset)).exp();
        }
        s += a * qn;
        qn *= q;
    }
    s
}

fn eval_checked(c: &[Complex64], offset: f64, k: u32, z: Complex64, tol: f64) -> Result<Evaluated> {
    if z.im <= 0.0 {
        return Err(Error::InvalidArgument("evaluation point must lie in the upper half-plane".into()));
    }
    let err = tail_estimate(c, k, z.im);
    if err > tol {
        return Err(Error::HeightBudget {
            height: z.im,
            n_max: c.len().saturating_sub(1),
            achievable: err,
        });
    }
    Ok(Evaluated {
        value: eval_series(c, offset, z),
        err,
    })
}

/// Result of an FFT coefficient recovery.
#[derive(Clone, Debug)]
pub struct FftInversion {
    pub expansion: QExpansion,
    /// Estimated aliasing contribution from indices beyond M.
    pub aliasing: f64,
    /// Roundoff amplification bound at the largest recovered index.
    pub roundoff: f64,
    pub height: f64,
    pub samples: usize,
}

/// Height that balances roundoff amplification against sample size for a
/// weight-w/2 form when recovering indices up to `n_out`.
pub fn auto_height(n_out: usize, k: u32) -> f64 {
    let w = (k as f64 / 2.0).max(1.0);
    w / (2.0 * PI * n_out.max(1) as f64)
}

/// Smallest power-of-two sample count whose aliasing factor e^{−2πMy}
/// is below 1e−20 relative to the largest recovered mode.
pub fn auto_samples(n_out: usize, y: f64) -> usize {
    let m = ((n_out as f64) + 47.0 / (2.0 * PI * y)).ceil() as usize;
    m.next_power_of_two().max(1024)
}

/// Recover c_n = e^{2πny}·(1/M)·Σ_j g(x₀ + j/M + iy)·e(−n(x₀ + j/M)) for a
/// period-1 sampler g, n ≤ n_max.
pub fn fft_invert<F>(sampler: F, m: usize, y: f64, n_max: usize, x0: f64, parallel: bool) -> Result<FftInversion>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    if !m.is_power_of_two() || n_max >= m / 2 {
        return Err(Error::InvalidArgument(format!(
            "sample count {m} must be a power of two above 2·n_max"
        )));
    }
    let points: Vec<usize> = (0..m).collect();
    let samples = par::map(&points, parallel, |&j| {
        sampler(Complex64::new(x0 + j as f64 / m as f64, y))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let s_max = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut buf = samples;
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    let coeffs: Vec<Complex64> = (0..=n_max)
        .map(|n| buf[n] / m as f64 * e(-(n as f64) * x0) * (2.0 * PI * n as f64 * y).exp())
        .collect();
    let roundoff = 4.0 * f64::EPSILON * s_max * (2.0 * PI * n_max as f64 * y).exp() * (m as f64).log2();
    // Aliasing: polynomial growth fitted on the top quarter of the range.
    let w = 8.0;
    let cst = (3 * n_max / 4..=n_max)
        .filter(|&n| n > 0)
        .map(|n| coeffs[n].norm() / (n as f64).powf(w))
        .fold(0.0, f64::max);
    let mut aliasing = 0.0;
    for kk in 1..=8 {
        let idx = (n_max + kk * m) as f64;
        aliasing += cst * idx.powf(w) * (-2.0 * PI * kk as f64 * m as f64 * y).exp();
    }
    aliasing += s_max * (-2.0 * PI * (m - n_max) as f64 * y).exp() * (2.0 * PI * n_max as f64 * y).exp();
    Ok(FftInversion {
        expansion: QExpansion::numeric(0, 1, coeffs),
        aliasing,
        roundoff,
        height: y,
        samples: m,
    })
}

/// Settings for the numerical slash pipelines.
#[derive(Clone, Copy, Debug)]
pub struct SlashConfig {
    pub n_out: usize,
    pub parallel: bool,
}

impl SlashConfig {
    pub fn new(n_out: usize) -> Self {
        SlashConfig {
            n_out,
            parallel: cfg!(feature = "parallel"),
        }
    }
}

fn weight_factor(w: Complex64, k: u32) -> Complex64 {
    // w^{−k/2} on the principal branch.
    (-(k as f64) / 2.0 * w.ln()).exp()
}

/// Coefficients of `f` truncated to the terms that matter at heights
/// ≥ `min_height`; fails if the stored expansion is too short.
pub fn sampling_coeffs(f: &QExpansion, min_height: f64) -> Result<Vec<Complex64>> {
    let need = terms_for_height(min_height, f.half_weight_numerator);
    let c = f.truncate(need).to_complex();
    let err = tail_estimate(&c, f.half_weight_numerator, min_height);
    if err > 1e-13 * (1.0 + c.iter().map(|x| x.norm()).fold(0.0, f64::max)) {
        return Err(Error::HeightBudget {
            height: min_height,
            n_max: f.n_max(),
            achievable: err,
        });
    }
    Ok(c)
}

/// Terms needed so that a weight-k/2 series evaluated at height ≥ y has a
/// negligible tail.
pub fn terms_for_height(y: f64, k: u32) -> usize {
    let w = k as f64 / 2.0;
    let mut n = (40.0 / (2.0 * PI * y)).ceil();
    for _ in 0..5 {
        n = ((40.0 + w * n.max(2.0).ln()) / (2.0 * PI * y)).ceil();
    }
    n as usize + 16
}

/// f|W₄(z) = (−2iz)^{−k/2} f(−1/(4z)), recovered numerically for n ≤ n_out.
pub fn slash_w4_numeric(f: &QExpansion, cfg: SlashConfig) -> Result<FftInversion> {
    let k = f.half_weight_numerator;
    let y = auto_height(cfg.n_out, k);
    let m = auto_samples(cfg.n_out, y);
    let c = sampling_coeffs(f, y / (1.0 + 4.0 * y * y))?;
    let off = *f.offset.numer() as f64 / *f.offset.denom() as f64;
    let sampler = |z: Complex64| -> Result<Complex64> {
        let w = -1.0 / (4.0 * z);
        Ok(weight_factor(Complex64::new(0.0, -2.0) * z, k) * eval_series(&c, off, w))
    };
    let mut inv = fft_invert(sampler, m, y, cfg.n_out, -0.5, cfg.parallel)?;
    inv.expansion.half_weight_numerator = k;
    inv.expansion.level = 4;
    Ok(inv)
}

/// 2^{k/2}·f|[ρ_{−1/2}](4z) = 2^{k/2}(1 − 8z)^{−k/2} f(4z/(1 − 8z)),
/// recovered numerically for n ≤ n_out.
pub fn slash_rho_half_numeric(f: &QExpansion, cfg: SlashConfig) -> Result<FftInversion> {
    let k = f.half_weight_numerator;
    let y = auto_height(cfg.n_out, k);
    let m = auto_samples(cfg.n_out, y);
    // Sample x ∈ [1/8 − 1/2, 1/8 + 1/2): |1 − 8z|² ≤ 16 + 64y².
    let c = sampling_coeffs(f, 4.0 * y / (16.0 + 64.0 * y * y))?;
    let off = *f.offset.numer() as f64 / *f.offset.denom() as f64;
    let scale = 2f64.powf(k as f64 / 2.0);
    let sampler = |z: Complex64| -> Result<Complex64> {
        let den = Complex64::new(1.0, 0.0) - 8.0 * z;
        Ok(scale * weight_factor(den, k) * eval_series(&c, off, 4.0 * z / den))
    };
    let mut inv = fft_invert(sampler, m, y, cfg.n_out, 0.125 - 0.5, cfg.parallel)?;
    inv.expansion.half_weight_numerator = k;
    inv.expansion.level = 16;
    Ok(inv)
}

/// Σ_{n ≤ x} |λ(n)|².
pub fn mean_square(lambda: &[Complex64], x: usize) -> Result<f64> {
    if x >= lambda.len() && x > 0 {
        return Err(Error::TableTooShort {
            have: lambda.len().saturating_sub(1),
            need: x,
        });
    }
    Ok(lambda.iter().take(x + 1).skip(1).map(|z| z.norm_sqr()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators() {
        let t = theta(30);
        assert_eq!(t.coeff_exact(4).unwrap(), Ratio::from_integer(2));
        let f = eis_f(30);
        assert_eq!(f.coeff_exact(3).unwrap(), Ratio::from_integer(4));
        assert_eq!(f.coeff_exact(2).unwrap(), Ratio::from_integer(0));
        assert_eq!(f.coeff_exact(9).unwrap(), Ratio::from_integer(13));
    }

    #[test]
    fn theta_powers() {
        let t = theta(50);
        assert_eq!(t.mul(&one(50)).unwrap().to_complex(), t.to_complex());
        let t2 = t.mul(&t).unwrap();
        assert_eq!(t2.coeff_exact(1).unwrap(), Ratio::from_integer(4));
        let t4 = t.pow(4).unwrap();
        assert_eq!(t4.coeff_exact(1).unwrap(), Ratio::from_integer(8));
        assert_eq!(t4.half_weight_numerator, 4);
        // Jacobi: r4(n) = 8σ(n) for odd n.
        assert_eq!(t4.coeff_exact(15).unwrap(), Ratio::from_integer(8 * 24));
    }

    #[test]
    fn json_roundtrip() {
        let q = theta(20).scale_exact(3, 16).unwrap();
        let back = QExpansion::from_json(&q.to_json(Some(0))).unwrap();
        assert_eq!(back.to_complex(), q.to_complex());
        assert!(back.is_exact());
        let n = q.as_numeric();
        let back = QExpansion::from_json(&n.to_json(Some(0))).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn evaluate_budget() {
        let t = theta(100);
        assert!(t.evaluate(Complex64::new(0.0, 0.001), 1e-12).is_err());
        let v = t.evaluate(Complex64::new(0.0, 1.0), 1e-12).unwrap();
        let direct: f64 = 1.0 + 2.0 * (1..10).map(|n| (-2.0 * PI * (n * n) as f64).exp()).sum::<f64>();
        assert!((v.value.re - direct).abs() < 1e-15);
    }
}
