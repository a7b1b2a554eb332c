//! Twisted L-functions L_f(s, u/d) through the approximate functional
//! equation, the sums D_r(s), and L♭(s) = Σ♭ λ_f(t) t^{−s} continued to
//! Re s > 1/2.
//!
//! For a modulus D with period q_D and dual family λ(·; D):
//!
//! L_f(s, u/D) = Σ λ_f(m) e(mu/D) m^{−s} V(m/(q_D T))
//!             + i^{−(ℓ+1/2)} q_D^{1−2s} Σ λ(m; D) ϖ_D(m, v) m^{s−1} W_s(mT/q_D).
//!
//! Summing over units u collapses e(mu/D) to the Ramanujan sum c_D(m) and
//! ϖ to G_{e,b}(m) c_{a²}(m).

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arith;
use crate::charsum::{self, TwistSpec};
use crate::error::{Error, Result};
use crate::gamma::{gamma_factor, ln_gamma_factor};
use crate::hecke::{EigenformBundle, Family};
use crate::kernel::{AfeConfig, KernelDiag, KernelTable};
use crate::par;
use crate::qexp;

/// i^{−(ℓ+1/2)}.
pub fn root_number(ell: u32) -> Complex64 {
    Complex64::from_polar(1.0, -PI * (2 * ell + 1) as f64 / 4.0)
}

/// A single twisted value L_f(s, u/d).
#[derive(Clone, Copy, Debug)]
pub struct TwistedLRequest<'a> {
    pub bundle: &'a EigenformBundle,
    pub twist: TwistSpec,
    pub u: i64,
    pub v: i64,
    pub s: Complex64,
}

impl<'a> TwistedLRequest<'a> {
    /// Request for u/d; v is the inverse of u mod d (v = 1 when d = 1).
    pub fn new(bundle: &'a EigenformBundle, d: u64, u: i64, s: Complex64) -> Result<Self> {
        let twist = TwistSpec::new(d)?;
        let v = if d == 1 {
            1
        } else {
            arith::mod_inverse(u.rem_euclid(d as i64), d as i64)
                .ok_or_else(|| Error::InvalidArgument(format!("gcd({u}, {d}) > 1")))?
        };
        Ok(TwistedLRequest { bundle, twist, u, v, s })
    }
}

/// A value with its error budget.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct LValue {
    pub re: f64,
    pub im: f64,
    pub t: f64,
    pub err_kernel: f64,
    pub err_tail: f64,
    pub terms: usize,
}

impl LValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn err(&self) -> f64 {
        self.err_kernel + self.err_tail
    }

    fn accumulate(&mut self, other: &LValue, c: Complex64) {
        let v = self.value() + other.value() * c;
        self.re = v.re;
        self.im = v.im;
        self.err_kernel += other.err_kernel * c.norm();
        self.err_tail += other.err_tail * c.norm();
        self.terms += other.terms;
    }
}

/// Kernel tables shared by every twisted value at one spectral point s.
#[derive(Clone, Debug)]
pub struct AfeKernels {
    pub s: Complex64,
    pub ell: u32,
    pub v: KernelTable,
    pub w: KernelTable,
}

impl AfeKernels {
    pub fn new(s: Complex64, ell: u32, cfg: &AfeConfig) -> Result<Self> {
        if !(s.re > 0.5) {
            return Err(Error::InvalidArgument(format!("Re s = {} must exceed 1/2", s.re)));
        }
        Ok(AfeKernels {
            s,
            ell,
            v: KernelTable::v(cfg)?,
            w: KernelTable::w(s, ell, cfg)?,
        })
    }

    /// Last index of the direct and dual sums for period q at balance T.
    pub fn lengths(&self, q: u64, t: f64) -> (usize, usize) {
        let q = q as f64;
        (
            (q * t * self.v.support_end()).floor() as usize,
            (q / t * self.w.support_end()).floor() as usize,
        )
    }

    fn budget(diag: &KernelDiag) -> (f64, f64) {
        (diag.quad + diag.interp + diag.trunc, diag.cut)
    }
}

fn check_table(bundle: &EigenformBundle, need: usize) -> Result<()> {
    if need > bundle.n_max {
        return Err(Error::TableTooShort { have: bundle.n_max, need });
    }
    Ok(())
}

/// One randomized comparison of a twisted value at balance T and 4T.
#[derive(Clone, Debug, Serialize)]
pub struct FeTrial {
    pub d: u64,
    pub u: i64,
    pub sigma: f64,
    pub tau: f64,
    pub t: f64,
    pub diff: f64,
    pub budget: f64,
    pub pass: bool,
}

/// Draw `trials` cases (d ≤ 50, 0.55 ≤ σ ≤ 1.5, |τ| ≤ 10, (u, d) = 1)
/// from a ChaCha8 stream seeded with `seed`, and compare each twisted value
/// at T = cfg.balance(s) and 4T against the summed error budgets.
pub fn fe_trials(bundle: &EigenformBundle, trials: usize, seed: u64, cfg: &AfeConfig, parallel: bool) -> Result<Vec<FeTrial>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(trials);
    while cases.len() < trials {
        let d: u64 = rng.gen_range(1..=50);
        let u: i64 = rng.gen_range(1..=d as i64);
        if arith::gcd(u as u64, d) != 1 {
            continue;
        }
        let s = Complex64::new(rng.gen_range(0.55..=1.5), rng.gen_range(-10.0..=10.0));
        cases.push((d, u, s));
    }
    par::map(&cases, parallel, |&(d, u, s)| {
        let k = AfeKernels::new(s, bundle.ell, cfg)?;
        let t = cfg.balance(s);
        let req = TwistedLRequest::new(bundle, d, u, s)?;
        let x = twisted_l_afe_with(&req, &k, t)?;
        let y = twisted_l_afe_with(&req, &k, 4.0 * t)?;
        let diff = (x.value() - y.value()).norm();
        let budget = x.err() + y.err();
        Ok(FeTrial {
            d,
            u,
            sigma: s.re,
            tau: s.im,
            t,
            diff,
            budget,
            pass: diff <= budget,
        })
    })
    .into_iter()
    .collect()
}

/// Σ_{m ≤ m_max} λ_f(m) e(mu/d) m^{−s}.
pub fn twisted_l_direct(bundle: &EigenformBundle, u: i64, d: u64, s: Complex64, m_max: usize) -> Result<Complex64> {
    check_table(bundle, m_max)?;
    let di = d as i64;
    let mut acc = Complex64::default();
    for m in 1..=m_max {
        let ph = (m as i64 % di * u.rem_euclid(di)) % di;
        acc += bundle.lambda_f[m] * qexp::e(ph as f64 / d as f64) * (-s * (m as f64).ln()).exp();
    }
    Ok(acc)
}

/// L_f(s, u/d) by the approximate functional equation at T = cfg.balance(s).
pub fn twisted_l_afe(req: &TwistedLRequest, cfg: &AfeConfig) -> Result<LValue> {
    let k = AfeKernels::new(req.s, req.bundle.ell, cfg)?;
    twisted_l_afe_with(req, &k, cfg.balance(req.s))
}

/// As [`twisted_l_afe`] with prebuilt kernels and explicit T.
pub fn twisted_l_afe_with(req: &TwistedLRequest, k: &AfeKernels, t: f64) -> Result<LValue> {
    let b = req.bundle;
    let tw = &req.twist;
    if (req.s - k.s).norm() > 0.0 || b.ell != k.ell {
        return Err(Error::InvalidArgument("kernels built for a different s or ℓ".into()));
    }
    let s = req.s;
    let q = tw.q_d;
    let (n_dir, n_dual) = k.lengths(q, t);
    check_table(b, n_dir.max(n_dual))?;
    let qt = q as f64 * t;
    let di = tw.d as i64;
    let ur = req.u.rem_euclid(di);

    let mut dir = Complex64::default();
    let mut abs_dir = 0.0;
    for m in 1..=n_dir {
        let lm = (m as f64).ln();
        let ph = (m as i64 % di * ur) % di;
        let c = b.lambda_f[m] * qexp::e(ph as f64 / tw.d as f64) * (-s * lm).exp();
        dir += c * k.v.eval_log(lm - qt.ln());
        abs_dir += c.norm();
    }

    let lam = b.lambda(tw.family);
    let mut dual = Complex64::default();
    let mut abs_dual = 0.0;
    let mut terms = n_dir;
    let shift = t.ln() - (q as f64).ln();
    for m in 1..=n_dual {
        if !tw.support_ok(b.ell, m as u64) || lam[m] == Complex64::default() {
            continue;
        }
        let lm = (m as f64).ln();
        let c = lam[m] * charsum::varpi(tw, b.ell, m as u64, req.v)? * ((s - 1.0) * lm).exp();
        dual += c * k.w.eval_log(lm + shift);
        abs_dual += c.norm();
        terms += 1;
    }
    let pref = root_number(b.ell) * ((1.0 - s * 2.0) * (q as f64).ln()).exp();
    let value = dir + pref * dual;
    let (kv, cv) = AfeKernels::budget(&k.v.diag);
    let (kw, cw) = AfeKernels::budget(&k.w.diag);
    let dual_scale = pref.norm() * abs_dual;
    Ok(LValue {
        re: value.re,
        im: value.im,
        t,
        err_kernel: abs_dir * kv + dual_scale * kw,
        err_tail: 2.0 * (abs_dir * cv + dual_scale * cw),
        terms,
    })
}

/// Powers m^{−s} and m^{s−1} for m ≤ n.
#[derive(Clone, Debug)]
pub struct PowerTable {
    pub neg: Vec<Complex64>,
    pub dual: Vec<Complex64>,
    pub log: Vec<f64>,
}

impl PowerTable {
    pub fn new(s: Complex64, n: usize) -> Self {
        let log: Vec<f64> = (0..=n).map(|m| if m == 0 { 0.0 } else { (m as f64).ln() }).collect();
        let neg = log.iter().map(|&l| (-s * l).exp()).collect();
        let dual = log.iter().map(|&l| ((s - 1.0) * l).exp()).collect();
        PowerTable { neg, dual, log }
    }
}

/// Cache of G_{e,b}(m) over one period, keyed by (e, b).
#[derive(Debug, Default)]
pub struct GaussCache {
    ell: u32,
    tables: BTreeMap<(u32, u64), Vec<Complex64>>,
}

impl GaussCache {
    pub fn new(ell: u32) -> Self {
        GaussCache {
            ell,
            tables: BTreeMap::new(),
        }
    }

    pub fn table(&mut self, e: u32, b: u64) -> &[Complex64] {
        let ell = self.ell;
        self.tables.entry((e, b)).or_insert_with(|| {
            let p = charsum::gauss_period(e, b);
            (0..p).map(|m| charsum::gauss_g(e, b, ell, m)).collect()
        })
    }
}

/// Σ*_{u mod D} L_f(s, u/D) through the collapsed character sums.
pub fn unit_sum_collapsed(
    bundle: &EigenformBundle,
    dd: u64,
    k: &AfeKernels,
    t: f64,
    pw: &PowerTable,
    gauss: &mut GaussCache,
) -> Result<LValue> {
    let tw = TwistSpec::new(dd)?;
    let dc = tw.decomposition()?;
    let q = tw.q_d;
    let (n_dir, n_dual) = k.lengths(q, t);
    let need = n_dir.max(n_dual);
    check_table(bundle, need)?;
    if pw.neg.len() <= need {
        return Err(Error::TableTooShort { have: pw.neg.len() - 1, need });
    }
    let lq = (q as f64 * t).ln();

    // Direct side: c_D(m) = Σ_{g | (D, m), D/g squarefree} g μ(D/g).
    let mut dir = Complex64::default();
    let mut abs_dir = 0.0;
    let mut terms = 0;
    for g in arith::divisors(dd) {
        let mu = arith::moebius(dd / g)?;
        if mu == 0 {
            continue;
        }
        let w = (g as i64 * mu as i64) as f64;
        let mut part = Complex64::default();
        let mut abs_part = 0.0;
        let g = g as usize;
        let mut m = g;
        while m <= n_dir {
            let c = bundle.lambda_f[m] * pw.neg[m];
            part += c * k.v.eval_log(pw.log[m] - lq);
            abs_part += c.norm();
            m += g;
            terms += 1;
        }
        dir += part * w;
        abs_dir += abs_part * w.abs();
    }

    // Dual side: c_{a²}(m) = Σ_{h | a} a h μ(a/h) over a h | m.
    let lam = bundle.lambda(tw.family);
    let period = charsum::gauss_period(dc.e, dc.b) as usize;
    let gt = gauss.table(dc.e, dc.b);
    let shift = t.ln() - (q as f64).ln();
    let mut dual = Complex64::default();
    let mut abs_dual = 0.0;
    for h in arith::divisors(dc.a) {
        let mu = arith::moebius(dc.a / h)?;
        if mu == 0 {
            continue;
        }
        let w = (dc.a as i64 * h as i64 * mu as i64) as f64;
        let step = (dc.a * h) as usize;
        let mut part = Complex64::default();
        let mut abs_part = 0.0;
        let mut m = step;
        while m <= n_dual {
            let l = lam[m];
            if l != Complex64::default() {
                let c = l * pw.dual[m] * gt[m % period];
                part += c * k.w.eval_log(pw.log[m] + shift);
                abs_part += c.norm();
                terms += 1;
            }
            m += step;
        }
        dual += part * w;
        abs_dual += abs_part * w.abs();
    }
    let pref = root_number(bundle.ell) * ((1.0 - k.s * 2.0) * (q as f64).ln()).exp();
    let value = dir + pref * dual;
    let (kv, cv) = AfeKernels::budget(&k.v.diag);
    let (kw, cw) = AfeKernels::budget(&k.w.diag);
    let dual_scale = pref.norm() * abs_dual;
    Ok(LValue {
        re: value.re,
        im: value.im,
        t,
        err_kernel: abs_dir * kv + dual_scale * kw,
        err_tail: 2.0 * (abs_dir * cv + dual_scale * cw),
        terms,
    })
}

/// Σ*_{u mod D} L_f(s, u/D) by one AFE evaluation per unit u.
pub fn unit_sum_per_unit(bundle: &EigenformBundle, dd: u64, k: &AfeKernels, t: f64) -> Result<LValue> {
    let mut acc = LValue {
        t,
        ..Default::default()
    };
    for u in 1..=dd as i64 {
        if arith::gcd(u as u64, dd) != 1 {
            continue;
        }
        let req = TwistedLRequest::new(bundle, dd, u, k.s)?;
        let v = twisted_l_afe_with(&req, k, t)?;
        acc.accumulate(&v, Complex64::new(1.0, 0.0));
    }
    Ok(acc)
}

/// Route for the unit sums inside D_r.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitSum {
    Collapsed,
    PerUnit,
}

/// D_r(s) = r^{−2} Σ_{d | r²} Σ*_{u mod d} L_f(s, u/d), at T = cfg.balance(s).
pub fn d_r(bundle: &EigenformBundle, r: u64, s: Complex64, cfg: &AfeConfig, route: UnitSum) -> Result<LValue> {
    let k = AfeKernels::new(s, bundle.ell, cfg)?;
    let t = cfg.balance(s);
    let pw = PowerTable::new(s, bundle.n_max);
    let mut gauss = GaussCache::new(bundle.ell);
    d_r_with(bundle, r, &k, t, &pw, &mut gauss, route)
}

fn d_r_with(
    bundle: &EigenformBundle,
    r: u64,
    k: &AfeKernels,
    t: f64,
    pw: &PowerTable,
    gauss: &mut GaussCache,
    route: UnitSum,
) -> Result<LValue> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be positive".into()));
    }
    let mut acc = LValue {
        t,
        ..Default::default()
    };
    let w = Complex64::new(1.0 / (r * r) as f64, 0.0);
    for d in arith::divisors(r * r) {
        let v = match route {
            UnitSum::Collapsed => unit_sum_collapsed(bundle, d, k, t, pw, gauss)?,
            UnitSum::PerUnit => unit_sum_per_unit(bundle, d, k, t)?,
        };
        acc.accumulate(&v, w);
    }
    Ok(acc)
}

/// Σ_{r ≤ r_max} μ(r) D_r(s) over all r, with its error budget.
pub fn moebius_d_sum(bundle: &EigenformBundle, r_max: u64, s: Complex64, cfg: &AfeConfig, parallel: bool) -> Result<LValue> {
    let k = AfeKernels::new(s, bundle.ell, cfg)?;
    let t = cfg.balance(s);
    let pw = PowerTable::new(s, bundle.n_max);
    let rs: Vec<u64> = (1..=r_max).filter(|&r| arith::is_squarefree(r)).collect();
    let parts = par::map(&rs, parallel, |&r| {
        let mut gauss = GaussCache::new(bundle.ell);
        d_r_with(bundle, r, &k, t, &pw, &mut gauss, UnitSum::Collapsed)
    });
    let mut acc = LValue {
        t,
        ..Default::default()
    };
    for (r, v) in rs.iter().zip(parts) {
        acc.accumulate(&v?, Complex64::new(arith::moebius(*r)? as f64, 0.0));
    }
    Ok(acc)
}

/// Σ_{t ≤ t_max, t squarefree} λ_f(t) t^{−s}.
pub fn lflat_direct(bundle: &EigenformBundle, s: Complex64, t_max: usize) -> Result<Complex64> {
    check_table(bundle, t_max)?;
    let mu = arith::moebius_table(t_max);
    Ok((1..=t_max)
        .filter(|&t| mu[t] != 0)
        .map(|t| bundle.lambda_f[t] * (-s * (t as f64).ln()).exp())
        .sum())
}

/// One point of the L♭ grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GridValue {
    pub sigma: f64,
    pub tau: f64,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
    pub r_max: u64,
    #[serde(rename = "T")]
    pub t: f64,
    pub err_kernel: f64,
    pub err_tail: f64,
    pub err_octave: f64,
}

impl GridValue {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Kernel, tail and octave diagnostics combined.
    pub fn err(&self) -> f64 {
        self.err_kernel + self.err_tail + self.err_octave
    }
}

/// Base balance for the L♭ sum; class e uses T_e = 2T (e = 0) or 4T.
pub fn lflat_balance(cfg: &AfeConfig) -> f64 {
    cfg.t.unwrap_or(1.0)
}

/// Coefficient-table length needed by [`lflat`].
pub fn lflat_demand(ell: u32, s: Complex64, r_max: u64, cfg: &AfeConfig) -> Result<usize> {
    let k = AfeKernels::new(s, ell, cfg)?;
    let t0 = lflat_balance(cfg);
    let mut need = 0;
    for r in arith::odd_squarefree_upto(r_max) {
        let d = r * r;
        for (mult, te) in [(1, 2.0 * t0), (2, 4.0 * t0), (4, 4.0 * t0)] {
            let q = TwistSpec::new(mult * d)?.q_d;
            let (a, b) = k.lengths(q, te);
            need = need.max(a).max(b);
        }
    }
    Ok(need)
}

/// L♭(s) as Σ_{r odd squarefree ≤ r_max} μ(r) r^{−2} Σ_{d | r²}
/// [¾S(d) − ¼S(2d) − ¼S(4d)], S(D) = Σ*_{u mod D} L_f(s, u/D); the even
/// squarefree r are folded in through D_{2r}.
pub fn lflat(bundle: &EigenformBundle, s: Complex64, r_max: u64, cfg: &AfeConfig, parallel: bool) -> Result<GridValue> {
    if r_max == 0 {
        return Err(Error::InvalidArgument("r_max must be positive".into()));
    }
    let k = AfeKernels::new(s, bundle.ell, cfg)?;
    let t0 = lflat_balance(cfg);
    let need = lflat_demand(bundle.ell, s, r_max, cfg)?;
    check_table(bundle, need)?;
    let pw = PowerTable::new(s, need);
    let rs = arith::odd_squarefree_upto(r_max);
    let parts = par::map(&rs, parallel, |&r| -> Result<LValue> {
        let mut gauss = GaussCache::new(bundle.ell);
        let mut acc = LValue::default();
        for d in arith::divisors(r * r) {
            for (mult, te, c) in [(1, 2.0 * t0, 0.75), (2, 4.0 * t0, -0.25), (4, 4.0 * t0, -0.25)] {
                let v = unit_sum_collapsed(bundle, mult * d, &k, te, &pw, &mut gauss)?;
                acc.accumulate(&v, Complex64::new(c, 0.0));
            }
        }
        let mut out = LValue::default();
        let w = arith::moebius(r)? as f64 / (r * r) as f64;
        out.accumulate(&acc, Complex64::new(w, 0.0));
        Ok(out)
    });
    let mut total = LValue::default();
    let mut octave = Complex64::default();
    for (r, p) in rs.iter().zip(parts) {
        let p = p?;
        if 2 * r > r_max {
            octave += p.value();
        }
        total.accumulate(&p, Complex64::new(1.0, 0.0));
    }
    let v = total.value();
    Ok(GridValue {
        sigma: s.re,
        tau: s.im,
        re: v.re,
        im: v.im,
        abs: v.norm(),
        r_max,
        t: t0,
        err_kernel: total.err_kernel,
        err_tail: total.err_tail,
        err_octave: octave.norm(),
    })
}

/// Evaluate [`lflat`] over a grid of points, in order.
pub fn lflat_grid(bundle: &EigenformBundle, points: &[Complex64], r_max: u64, cfg: &AfeConfig, parallel: bool) -> Result<Vec<GridValue>> {
    points.iter().map(|&s| lflat(bundle, s, r_max, cfg, parallel)).collect()
}

/// Mean of L♭ on a circle against its center value.
#[derive(Clone, Debug, Serialize)]
pub struct CircleReport {
    pub center_re: f64,
    pub center_im: f64,
    pub radius: f64,
    pub mean_re: f64,
    pub mean_im: f64,
    pub center_value_re: f64,
    pub center_value_im: f64,
    pub diff: f64,
    pub budget: f64,
}

impl CircleReport {
    pub fn passes(&self) -> bool {
        self.diff <= self.budget
    }
}

/// Cauchy mean value test: mean of L♭ over `points` equispaced points on
/// |s − s₀| = radius equals L♭(s₀). The budget is the summed kernel and
/// tail diagnostics plus an estimate of the discretization error of the
/// mean.
pub fn cauchy_circle(bundle: &EigenformBundle, s0: Complex64, radius: f64, points: usize, r_max: u64, cfg: &AfeConfig, parallel: bool) -> Result<CircleReport> {
    if points < 3 || !(radius > 0.0) || s0.re - radius <= 0.5 {
        return Err(Error::InvalidArgument("circle must have ≥ 3 points and stay in Re s > 1/2".into()));
    }
    let c = lflat(bundle, s0, r_max, cfg, parallel)?;
    let mut mean = Complex64::default();
    let mut budget = c.err_kernel + c.err_tail;
    let mut sup: f64 = c.abs;
    for j in 0..points {
        let z = s0 + Complex64::from_polar(radius, 2.0 * PI * j as f64 / points as f64);
        let g = lflat(bundle, z, r_max, cfg, parallel)?;
        mean += g.value() / points as f64;
        budget += (g.err_kernel + g.err_tail) / points as f64;
        sup = sup.max(g.abs);
    }
    // The truncated r-sum is itself holomorphic, so the octave diagnostic
    // does not enter. The discrete mean misses Taylor terms of order
    // n, 2n, …, bounded by M(R)(r/R)^n/(1 − (r/R)^n) with R halfway to
    // Re s = 1/2; M(R) is estimated by the sup on the circle.
    let rho = radius / ((s0.re - 0.5) / 2.0);
    let rn = rho.powi(points as i32);
    budget += sup * rn / (1.0 - rn);
    Ok(CircleReport {
        center_re: s0.re,
        center_im: s0.im,
        radius,
        mean_re: mean.re,
        mean_im: mean.im,
        center_value_re: c.re,
        center_value_im: c.im,
        diff: (mean - c.value()).norm(),
        budget,
    })
}

/// Least-squares slope of log|L♭(σ + iτ)| against log(1 + |τ|).
#[derive(Clone, Debug, Serialize)]
pub struct ExponentFit {
    pub sigma: f64,
    pub slope: f64,
    pub bound: f64,
    pub pass: bool,
    pub values: Vec<GridValue>,
}

pub fn exponent_fit(bundle: &EigenformBundle, sigma: f64, taus: &[f64], r_max: u64, cfg: &AfeConfig, parallel: bool) -> Result<ExponentFit> {
    if taus.len() < 2 {
        return Err(Error::InvalidArgument("need at least two τ values".into()));
    }
    let pts: Vec<Complex64> = taus.iter().map(|&t| Complex64::new(sigma, t)).collect();
    let values = lflat_grid(bundle, &pts, r_max, cfg, parallel)?;
    let xs: Vec<f64> = taus.iter().map(|t| (1.0 + t.abs()).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.abs.max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    let bound = 1.0 - sigma + 0.2;
    Ok(ExponentFit {
        sigma,
        slope,
        bound,
        pass: slope <= bound,
        values,
    })
}

/// Λ(f, u/d, s) = ∫₀^∞ f(iy + u/d) y^{s+ℓ/2−1/4} dy/y and its reference.
#[derive(Clone, Debug, Serialize)]
pub struct LambdaIntegral {
    pub re: f64,
    pub im: f64,
    /// Bound for the discarded part over (0, y_split).
    pub tail_bound: f64,
    /// |Simpson(h) − Simpson(2h)|.
    pub quad_err: f64,
    /// Sampled sup of |f(z)| (Im z)^{ℓ/2+1/4} over the three cusps.
    pub m_f: f64,
    /// (2π)^{−(ℓ/2−1/4)} L∞(s) Σ λ_f(m) e(mu/d) m^{−s}.
    pub reference_re: f64,
    pub reference_im: f64,
    pub rel_diff: f64,
}

/// Sampled sup of the Γ₀(4)-invariant |f(z)| y^{k/2}, using the
/// expansions at ∞ (f), 0 (𝔥) and −1/2 (𝔤, at 4z, scaled by 2^{−k/2}).
pub fn invariant_sup(bundle: &EigenformBundle) -> Result<f64> {
    let kh = (2 * bundle.ell + 1) as f64 / 2.0;
    let mut sup = 0.0f64;
    for (fam, scale) in [(Family::F, 1.0), (Family::H, 1.0), (Family::G, 2f64.powf(kh))] {
        let a = bundle.unnormalized(fam);
        let n = a.len().min(400);
        for iy in 0..40 {
            let y = 0.1 + 0.04 * iy as f64;
            for ix in 0..64 {
                let z = Complex64::new(ix as f64 / 64.0, y);
                let v = qexp::eval_series(&a[..n], 0.0, z);
                sup = sup.max(v.norm() * y.powf(kh) * scale);
            }
        }
    }
    Ok(sup)
}

pub fn lambda_integral(bundle: &EigenformBundle, u: i64, d: u64, s: Complex64, y_split: f64) -> Result<LambdaIntegral> {
    if s.re < 2.5 {
        return Err(Error::InvalidArgument("Λ needs Re s ≥ 2.5".into()));
    }
    if !(y_split > 0.0 && y_split < 1.0) || d == 0 {
        return Err(Error::InvalidArgument("need 0 < y_split < 1 and d ≥ 1".into()));
    }
    let kappa = bundle.kappa();
    let a = bundle.unnormalized(Family::F);
    // Terms until n^{κ'} e^{−2πn y_split} < e^{−45}.
    let mut n_terms = 1usize;
    while 2.0 * PI * n_terms as f64 * y_split - kappa * (n_terms as f64).ln() < 45.0 {
        n_terms += 1;
    }
    check_table(bundle, n_terms)?;
    let q = u.rem_euclid(d as i64) as f64 / d as f64;
    let phases: Vec<Complex64> = (0..=n_terms).map(|n| a[n] * qexp::e(n as f64 * q)).collect();
    let x0 = y_split.ln();
    let x1 = 12f64.ln();
    let integrand = |x: f64| -> Complex64 {
        let y = x.exp();
        let mut f = Complex64::default();
        let r = (-2.0 * PI * y).exp();
        let mut p = r;
        for c in phases.iter().skip(1) {
            f += c * p;
            p *= r;
            if p < 1e-300 {
                break;
            }
        }
        f * ((s + kappa) * x).exp()
    };
    let panels = 8192;
    let h = (x1 - x0) / panels as f64;
    let vals: Vec<Complex64> = (0..=panels).map(|i| integrand(x0 + i as f64 * h)).collect();
    let simpson = |stride: usize| -> Complex64 {
        let m = panels / stride;
        let hh = h * stride as f64;
        let mut acc = vals[0] + vals[panels];
        for i in 1..m {
            acc += vals[i * stride] * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * hh / 3.0
    };
    let fine = simpson(1);
    let coarse = simpson(2);
    let m_f = invariant_sup(bundle)?;
    let tail_bound = m_f * y_split.powf(s.re - 0.5) / (s.re - 0.5);
    let direct = twisted_l_direct(bundle, u, d, s, bundle.n_max.min(200_000))?;
    let reference = (2.0 * PI).powf(-kappa) * gamma_factor(s, bundle.ell)? * direct;
    let rel_diff = (fine - reference).norm() / reference.norm().max(1e-300);
    if tail_bound > 0.1 * reference.norm() {
        return Err(Error::Invariant(format!("Λ tail bound {tail_bound:.2e} exceeds the budget")));
    }
    Ok(LambdaIntegral {
        re: fine.re,
        im: fine.im,
        tail_bound,
        quad_err: (fine - coarse).norm(),
        m_f,
        reference_re: reference.re,
        reference_im: reference.im,
        rel_diff,
    })
}

/// ln of q^s L∞(s), for functional-equation bookkeeping.
pub fn ln_completion(q: u64, s: Complex64, ell: u32) -> Result<Complex64> {
    Ok(s * (q as f64).ln() + ln_gamma_factor(s, ell)?)
}

/// Riesz means R(x) = Σ♭_{t ≤ x} (1 − t/x) λ_f(t) for every integer
/// x = 1..=x_max (index 0 unused).
pub fn riesz_series(bundle: &EigenformBundle, x_max: usize) -> Result<Vec<Complex64>> {
    check_table(bundle, x_max)?;
    let mu = arith::moebius_table(x_max);
    let mut a = Complex64::default();
    let mut b = Complex64::default();
    let mut out = vec![Complex64::default(); x_max + 1];
    for x in 1..=x_max {
        if mu[x] != 0 {
            a += bundle.lambda_f[x];
            b += bundle.lambda_f[x] * x as f64;
        }
        out[x] = a - b / x as f64;
    }
    Ok(out)
}

pub fn riesz_mean(bundle: &EigenformBundle, x: usize) -> Result<Complex64> {
    if x == 0 {
        return Err(Error::InvalidArgument("x must be positive".into()));
    }
    Ok(riesz_series(bundle, x)?[x])
}

/// |R(x)| ≤ C x^θ on [x_fit, x_max] with C = max_{x ≤ x_fit} |R(x)| x^{−θ}.
#[derive(Clone, Debug, Serialize)]
pub struct RieszReport {
    pub exponent: f64,
    pub x_fit: usize,
    pub x_max: usize,
    pub c: f64,
    pub worst_ratio: f64,
    pub worst_x: usize,
    pub pass: bool,
}

pub fn riesz_check(bundle: &EigenformBundle, exponent: f64, x_fit: usize, x_max: usize) -> Result<RieszReport> {
    if x_fit == 0 || x_fit > x_max {
        return Err(Error::InvalidArgument("need 1 ≤ x_fit ≤ x_max".into()));
    }
    let r = riesz_series(bundle, x_max)?;
    let c = (1..=x_fit)
        .map(|x| r[x].norm() / (x as f64).powf(exponent))
        .fold(0.0, f64::max);
    let mut worst = (0.0, x_fit);
    for (x, v) in r.iter().enumerate().skip(x_fit) {
        let ratio = v.norm() / (c * (x as f64).powf(exponent));
        if ratio > worst.0 {
            worst = (ratio, x);
        }
    }
    Ok(RieszReport {
        exponent,
        x_fit,
        x_max,
        c,
        worst_ratio: worst.0,
        worst_x: worst.1,
        pass: worst.0 <= 1.0,
    })
}

/// Sign changes of λ_f on squarefree t ≤ x. Each class t mod 8 is rotated
/// by the phase of its first nonzero value; `phase_residual` is the largest
/// |Im|/|λ| left after rotation (0 for real coefficients).
#[derive(Clone, Debug, Serialize)]
pub struct SignReport {
    pub x: usize,
    pub changes: usize,
    pub nonzero: usize,
    pub phase_residual: f64,
}

pub fn sign_changes(bundle: &EigenformBundle, x: usize) -> Result<SignReport> {
    check_table(bundle, x)?;
    let mu = arith::moebius_table(x);
    let scale = bundle.lambda_f[1..=x].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tiny = 1e-9 * scale.max(1e-300);
    let mut rot: [Option<Complex64>; 8] = [None; 8];
    let mut prev: Option<bool> = None;
    let mut changes = 0;
    let mut nonzero = 0;
    let mut residual = 0.0f64;
    for t in 1..=x {
        let l = bundle.lambda_f[t];
        if mu[t] == 0 || l.norm() <= tiny {
            continue;
        }
        let r = *rot[t % 8].get_or_insert_with(|| (l / l.norm()).conj());
        let z = l * r;
        residual = residual.max(z.im.abs() / z.norm());
        let pos = z.re > 0.0;
        if prev.is_some_and(|p| p != pos) {
            changes += 1;
        }
        prev = Some(pos);
        nonzero += 1;
    }
    Ok(SignReport {
        x,
        changes,
        nonzero,
        phase_residual: residual,
    })
}
