//! Shimura lift coefficients, the squarefree-reduction inequality and
//! coefficient-size monitoring.

use num_complex::Complex64;
use serde::Serialize;

use crate::arith;
use crate::error::{Error, Result};
use crate::hecke::EigenformBundle;
use crate::par;

/// Unnormalized coefficients A_t(n) of the lift Sh_t f, n = 0..=n_max.
#[derive(Clone, Debug, Serialize)]
pub struct LiftSeries {
    pub t: u64,
    pub ell: u32,
    pub a: Vec<Complex64>,
}

/// A_t(n) = Σ_{d|n} χ_t(d) d^{ℓ−1} a_f(t(n/d)²).
pub fn lift_coeffs(b: &EigenformBundle, t: u64, n_max: usize) -> Result<LiftSeries> {
    if t == 0 || !arith::is_squarefree(t) {
        return Err(Error::InvalidArgument(format!("t = {t} is not squarefree")));
    }
    let need = t as usize * n_max * n_max;
    if need > b.n_max {
        return Err(Error::TableTooShort { have: b.n_max, need });
    }
    let kappa = b.kappa();
    let af = |m: usize| b.lambda_f[m] * (m as f64).powf(kappa);
    let mut a = vec![Complex64::default(); n_max + 1];
    for (n, an) in a.iter_mut().enumerate().skip(1) {
        let mut s = Complex64::default();
        for d in arith::divisors(n as u64) {
            let chi = arith::chi_t(t, b.ell, d as i64)?;
            if chi == 0 {
                continue;
            }
            let q = n / d as usize;
            s += af(t as usize * q * q) * (chi as f64 * (d as f64).powi(b.ell as i32 - 1));
        }
        *an = s;
    }
    Ok(LiftSeries { t, ell: b.ell, a })
}

impl LiftSeries {
    /// Largest relative deviation from A(p)A(n) = A(pn) + p^{2ℓ−1}A(n/p)
    /// over n ≤ n_max/p, after normalizing A(1) = 1.
    pub fn hecke_residual(&self, p: u64) -> f64 {
        let p = p as usize;
        let a1 = self.a[1];
        let a: Vec<Complex64> = self.a.iter().map(|z| z / a1).collect();
        let pk = (p as f64).powi(2 * self.ell as i32 - 1);
        let mut worst = 0.0f64;
        let top = (self.a.len() - 1) / p;
        for n in 1..=top {
            let low = if n % p == 0 { a[n / p] * pk } else { Complex64::default() };
            let lhs = a[p] * a[n];
            let rhs = a[p * n] + low;
            let scale = lhs.norm().max(rhs.norm()).max(1e-300);
            worst = worst.max((lhs - rhs).norm() / scale);
        }
        worst
    }
}

/// One row of the t-independence check.
#[derive(Clone, Debug, Serialize)]
pub struct TIndependenceRow {
    pub t: u64,
    pub n: usize,
    pub ratio_re: f64,
    pub ratio_im: f64,
    pub rel_dev: f64,
    pub pass: bool,
}

/// Compare t^{−(ℓ/2−1/4)}A_t(n)/λ_f(t) across t, relative to the first
/// usable t. Values of t with |λ_f(t)| ≤ 1e−8 are skipped.
pub fn t_independence(b: &EigenformBundle, ts: &[u64], n_max: usize, tol: f64) -> Result<Vec<TIndependenceRow>> {
    let kappa = b.kappa();
    let usable: Vec<u64> = ts
        .iter()
        .copied()
        .filter(|&t| (t as usize) < b.lambda_f.len() && b.lambda_f[t as usize].norm() > 1e-8)
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidArgument("no t with nonzero λ_f(t)".into()));
    }
    let lifts: Vec<Vec<Complex64>> = usable
        .iter()
        .map(|&t| {
            let l = lift_coeffs(b, t, n_max)?;
            let c = (t as f64).powf(-kappa) / b.lambda_f[t as usize];
            Ok(l.a.iter().map(|z| z * c).collect())
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (k, &t) in usable.iter().enumerate() {
        for n in 1..=n_max {
            let r = lifts[k][n];
            let r0 = lifts[0][n];
            let dev = (r - r0).norm() / r0.norm().max(1e-300);
            rows.push(TIndependenceRow {
                t,
                n,
                ratio_re: r.re,
                ratio_im: r.im,
                rel_dev: dev,
                pass: dev < tol,
            });
        }
    }
    Ok(rows)
}

/// Outcome of the squarefree-reduction inequality scan.
#[derive(Clone, Debug, Serialize)]
pub struct LsqfreeReport {
    pub m_max: usize,
    pub worst_ratio: f64,
    pub worst_m: usize,
    pub failures: Vec<usize>,
}

impl LsqfreeReport {
    pub fn all_pass(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Check |λ(m)| ≤ |λ(q)| τ(r)² for m = q r² split by the prime set Q,
/// over 1 ≤ m ≤ m_max, with relative slack 1e−9.
pub fn check_lsqfree(lam: &[Complex64], in_q: impl Fn(u64) -> bool + Sync, m_max: usize, parallel: bool) -> Result<LsqfreeReport> {
    if m_max >= lam.len() {
        return Err(Error::TableTooShort { have: lam.len().saturating_sub(1), need: m_max });
    }
    let scale = lam.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ms: Vec<usize> = (1..=m_max).collect();
    let rows: Vec<(usize, f64, bool)> = par::map(&ms, parallel, |&m| {
        let sp = arith::prime_set_split(m as u64, &in_q).expect("m >= 1");
        let tau = arith::divisor_count(sp.r).expect("r >= 1") as f64;
        let bound = lam[sp.q as usize].norm() * tau * tau;
        let v = lam[m].norm();
        let ratio = if bound > 0.0 {
            v / bound
        } else if v <= 1e-12 * scale {
            0.0
        } else {
            f64::INFINITY
        };
        (m, ratio, v <= bound * (1.0 + 1e-9) + 1e-12 * scale)
    });
    let mut worst = (0.0, 0);
    let mut failures = Vec::new();
    for (m, r, ok) in rows {
        if r > worst.0 {
            worst = (r, m);
        }
        if !ok {
            failures.push(m);
        }
    }
    Ok(LsqfreeReport {
        m_max,
        worst_ratio: worst.0,
        worst_m: worst.1,
        failures,
    })
}

/// max over squarefree t ≤ x of |λ(t)|/t^{1/6}.
pub fn rho_monitor(lam: &[Complex64], x: usize) -> Result<f64> {
    if x >= lam.len() {
        return Err(Error::TableTooShort { have: lam.len().saturating_sub(1), need: x });
    }
    Ok((1..=x)
        .filter(|&t| arith::is_squarefree(t as u64))
        .map(|t| lam[t].norm() / (t as f64).powf(1.0 / 6.0))
        .fold(0.0, f64::max))
}
