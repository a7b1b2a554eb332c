//! The acceptance suite: twelve criteria, each returning a pass flag, the
//! measured quantities and its wall time.

use std::collections::BTreeMap;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::charsum;
use crate::error::{Error, Result};
use crate::hecke::{self, EigenformBundle, Family};
use crate::kernel::AfeConfig;
use crate::lfun::{self, TwistedLRequest};
use crate::par;
use crate::qexp::QExpansion;
use crate::shimura;
use crate::space::CuspSpace;

/// Parameters of a selftest run.
#[derive(Clone, Debug, Serialize)]
pub struct SelftestConfig {
    pub ell: u32,
    pub primes: Vec<u64>,
    pub parallel: bool,
    pub seed: u64,
    pub afe: AfeConfig,
    /// r_max of the σ = 1.5 and drift checks.
    pub r_max: u64,
    /// r_max of the circle, conjugation and exponent-fit checks.
    pub r_max_monitor: u64,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig {
            ell: 6,
            primes: vec![3, 5, 7, 11, 13],
            parallel: true,
            seed: 20_240_601,
            afe: AfeConfig::default(),
            r_max: 80,
            r_max_monitor: 40,
        }
    }
}

/// Outcome of one criterion.
#[derive(Clone, Debug, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub pass: bool,
    pub seconds: f64,
    pub detail: Value,
}

impl CriterionResult {
    /// One human-readable line.
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<34} {} ({:.1}s) {}",
            self.id,
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.seconds,
            self.detail
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub config: SelftestConfig,
    pub setup_seconds: f64,
    pub criteria: Vec<CriterionResult>,
}

impl SelftestReport {
    pub fn all_pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }
}

pub const CRITERIA: [&str; 12] = [
    "character-sum closed form",
    "Weil bound",
    "Hecke coefficient vs coset",
    "operator identities at p = 2",
    "cusp companions are eigenforms",
    "Shimura lift",
    "squarefree-reduction inequality",
    "AFE consistency",
    "Moebius rearrangement",
    "L-flat witnesses",
    "Riesz mean",
    "pipeline reproducibility",
];

/// Shared state: the cusp space, both eigenforms and the grid of character sums.
pub struct Context {
    pub cfg: SelftestConfig,
    pub space: CuspSpace,
    pub bundles: Vec<EigenformBundle>,
    charsum_rows: Option<(Vec<charsum::CharsumRow>, f64)>,
}

/// Coefficients needed by the L♭ checks.
pub fn required_n_max(cfg: &SelftestConfig) -> Result<usize> {
    let mut need = 1_000_000;
    for s in [Complex64::new(1.5, 0.0), Complex64::new(1.1, 0.0)] {
        need = need.max(lfun::lflat_demand(cfg.ell, s, cfg.r_max, &cfg.afe)?);
    }
    for s in [Complex64::new(0.75, 20.0), Complex64::new(0.8, 2.0)] {
        need = need.max(lfun::lflat_demand(cfg.ell, s, cfg.r_max_monitor, &cfg.afe)?);
    }
    Ok(need)
}

impl Context {
    pub fn new(cfg: SelftestConfig) -> Result<Self> {
        let n = required_n_max(&cfg)?;
        let space = CuspSpace::new(cfg.ell, n, cfg.parallel)?;
        let bundles = hecke::extract_all(&space, &cfg.primes)?;
        Ok(Context {
            cfg,
            space,
            bundles,
            charsum_rows: None,
        })
    }

    pub fn bundle(&self) -> &EigenformBundle {
        &self.bundles[0]
    }

    fn charsum(&mut self) -> Result<&(Vec<charsum::CharsumRow>, f64)> {
        if self.charsum_rows.is_none() {
            let t0 = Instant::now();
            let rows = charsum::verify_grid(self.cfg.ell, 400, 60, self.cfg.parallel)?;
            self.charsum_rows = Some((rows, t0.elapsed().as_secs_f64()));
        }
        Ok(self.charsum_rows.as_ref().unwrap())
    }

    /// Run criterion `id` (1..=12).
    pub fn run(&mut self, id: u8) -> Result<CriterionResult> {
        let t0 = Instant::now();
        let (pass, detail) = match id {
            1 => self.c1()?,
            2 => self.c2()?,
            3 => self.c3()?,
            4 => self.c4()?,
            5 => self.c5()?,
            6 => self.c6()?,
            7 => self.c7()?,
            8 => self.c8()?,
            9 => self.c9()?,
            10 => self.c10()?,
            11 => self.c11()?,
            12 => self.c12()?,
            _ => return Err(Error::InvalidArgument(format!("no criterion {id}"))),
        };
        Ok(CriterionResult {
            id,
            name: CRITERIA[id as usize - 1].to_string(),
            pass,
            seconds: t0.elapsed().as_secs_f64(),
            detail,
        })
    }

    fn c1(&mut self) -> Result<(bool, Value)> {
        let (rows, secs) = self.charsum()?;
        let worst = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
        let pass = worst < 1e-9 && *secs < 60.0 && !rows.is_empty();
        Ok((pass, json!({"rows": rows.len(), "max_abs_diff": worst, "grid_seconds": secs})))
    }

    fn c2(&mut self) -> Result<(bool, Value)> {
        let (rows, _) = self.charsum()?;
        let worst = rows.iter().map(|r| r.weil_ratio).fold(0.0, f64::max);
        let all = rows.iter().all(|r| r.weil_ok);
        Ok((all, json!({"rows": rows.len(), "max_weil_ratio": worst})))
    }

    fn c3(&mut self) -> Result<(bool, Value)> {
        let n_out = 40;
        let mut worst = 0.0f64;
        let mut alias = 0.0f64;
        for a in 1..=self.space.dim() {
            let f = self.space.basis_expansion(a).truncate(20_000);
            let coeff = hecke::t_p2_coeff(&f, 3, self.cfg.ell)?.to_complex();
            let inv = hecke::t_p2_coset(&f, 3, self.cfg.ell, n_out, self.cfg.parallel)?;
            let coset = inv.expansion.to_complex();
            worst = worst.max(hecke::residual(&coset[1..=n_out], &coeff[1..=n_out]));
            alias = alias.max(inv.aliasing + inv.roundoff);
        }
        Ok((worst < 1e-6, json!({"p": 3, "n_max": n_out, "max_residual": worst, "fft_budget": alias})))
    }

    fn c4(&mut self) -> Result<(bool, Value)> {
        let b = self.bundles[0].truncated(40_000);
        let small = CuspSpace::new(self.cfg.ell, 40_000, self.cfg.parallel)?;
        let r = hecke::verify_niwa(&small, &b, self.cfg.parallel)?;
        let pass = r.passes(1e-6);
        Ok((pass, serde_json::to_value(&r)?))
    }

    fn c5(&mut self) -> Result<(bool, Value)> {
        let b = self.bundles[0].truncated(40_000);
        let mut pass = true;
        let mut rows = Vec::new();
        for p in [3, 5] {
            let r = hecke::companion_residuals(&b, p)?;
            pass &= r.max_residual() < 1e-6 && r.max_eigen_mismatch() < 1e-8;
            rows.push(json!({"p": p, "max_residual": r.max_residual(), "eigen_mismatch": r.max_eigen_mismatch()}));
        }
        let omega: BTreeMap<u64, f64> = b.omega.iter().filter(|(&p, _)| p <= 13).map(|(&p, &w)| (p, w)).collect();
        let needed = [3u64, 5, 7, 11, 13];
        let covered = needed.iter().all(|p| omega.contains_key(p));
        let bounded = omega.values().all(|w| w.abs() <= 2.0 + 1e-9);
        pass &= covered && bounded;
        Ok((pass, json!({"companions": rows, "omega": omega, "all_p_le_13": covered})))
    }

    fn c6(&mut self) -> Result<(bool, Value)> {
        let b = self.bundles[0].truncated(40_000);
        let rows = shimura::t_independence(&b, &[1, 5, 13], 50, 1e-6)?;
        let worst = rows.iter().map(|r| r.rel_dev).fold(0.0, f64::max);
        let ts: Vec<u64> = rows.iter().map(|r| r.t).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
        let mut hecke_res = 0.0f64;
        for &t in &ts {
            hecke_res = hecke_res.max(shimura::lift_coeffs(&b, t, 50)?.hecke_residual(3));
        }
        let pass = rows.iter().all(|r| r.pass) && hecke_res < 1e-6 && ts.len() >= 2;
        Ok((pass, json!({"t_used": ts, "max_rel_dev": worst, "hecke_residual_p3": hecke_res})))
    }

    fn c7(&mut self) -> Result<(bool, Value)> {
        let b = self.bundle();
        let mut pass = true;
        let mut out = BTreeMap::new();
        for (name, fam) in [("f", Family::F), ("g", Family::G), ("h", Family::H)] {
            let r = shimura::check_lsqfree(b.lambda(fam), |p| p == 2, 5000, self.cfg.parallel)?;
            pass &= r.all_pass();
            out.insert(name, json!({"worst_ratio": r.worst_ratio, "worst_m": r.worst_m, "failures": r.failures.len()}));
        }
        Ok((pass, json!(out)))
    }

    fn c8(&mut self) -> Result<(bool, Value)> {
        let b = self.bundle();
        let afe = &self.cfg.afe;
        let trials = lfun::fe_trials(b, 30, self.cfg.seed, afe, self.cfg.parallel)?;
        let t_pass = trials.iter().all(|r| r.pass);
        let worst_ratio = trials.iter().map(|r| r.diff / r.budget).fold(0.0, f64::max);
        let worst_diff = trials.iter().map(|r| r.diff).fold(0.0, f64::max);
        let mut c = afe.clone();
        c.t = Some(8.0);
        let s = Complex64::new(2.0, 1.0);
        let req = TwistedLRequest::new(b, 5, 2, s)?;
        let a = lfun::twisted_l_afe(&req, &c)?;
        let direct = lfun::twisted_l_direct(b, 2, 5, s, 100_000)?;
        let sigma2 = (a.value() - direct).norm();
        let pass = t_pass && sigma2 < 1e-6;
        Ok((
            pass,
            json!({"trials": trials.len(), "max_diff": worst_diff, "max_diff_over_budget": worst_ratio, "sigma2_direct_diff": sigma2}),
        ))
    }

    fn c9(&mut self) -> Result<(bool, Value)> {
        let b = self.bundle();
        let s = Complex64::new(2.0, 1.0);
        let m = lfun::moebius_d_sum(b, 30, s, &self.cfg.afe, self.cfg.parallel)?;
        let d = lfun::lflat_direct(b, s, 100_000)?;
        let diff = (m.value() - d).norm();
        Ok((diff < 1e-4, json!({"r_max": 30, "afe_sum": [m.re, m.im], "direct": [d.re, d.im], "diff": diff, "afe_err": m.err()})))
    }

    fn c10(&mut self) -> Result<(bool, Value)> {
        let t0 = Instant::now();
        let b = &self.bundles[0];
        let afe = &self.cfg.afe;
        let par = self.cfg.parallel;
        let s15 = Complex64::new(1.5, 0.0);
        let g15 = lfun::lflat(b, s15, self.cfg.r_max, afe, par)?;
        let d15 = lfun::lflat_direct(b, s15, 1_000_000)?;
        let diff15 = (g15.value() - d15).norm();

        let s11 = Complex64::new(1.1, 0.0);
        let g40 = lfun::lflat(b, s11, self.cfg.r_max / 2, afe, par)?;
        let g80 = lfun::lflat(b, s11, self.cfg.r_max, afe, par)?;
        let drift = (g40.value() - g80.value()).norm();

        let rm = self.cfg.r_max_monitor;
        let circle = lfun::cauchy_circle(b, Complex64::new(0.85, 2.0), 0.05, 8, rm, afe, par)?;

        let sc = Complex64::new(0.9, 4.0);
        let x = lfun::lflat(&self.bundles[0], sc.conj(), 30, afe, par)?;
        let conj_pass;
        let conj_diff;
        if self.bundles.len() > 1 {
            let y = lfun::lflat(&self.bundles[1], sc, 30, afe, par)?;
            conj_diff = (x.value() - y.value().conj()).norm();
            conj_pass = conj_diff <= 1e-12 * x.abs.max(1.0);
        } else {
            let y = lfun::lflat(&self.bundles[0], sc, 30, afe, par)?;
            conj_diff = (x.value() - y.value().conj()).norm();
            conj_pass = conj_diff <= 1e-12 * x.abs.max(1.0);
        }

        let taus: Vec<f64> = (0..=10).map(|i| 2.0 * i as f64).collect();
        let mut fits = Vec::new();
        let mut fit_pass = true;
        for sigma in [0.75, 0.9, 1.05] {
            let f = lfun::exponent_fit(b, sigma, &taus, rm, afe, par)?;
            fit_pass &= f.pass;
            fits.push(json!({"sigma": sigma, "slope": f.slope, "bound": f.bound}));
        }
        let secs = t0.elapsed().as_secs_f64();
        let pass = diff15 < 1e-4
            && drift < 3.0 * g40.err_octave
            && circle.passes()
            && conj_pass
            && fit_pass
            && secs < 600.0;
        Ok((
            pass,
            json!({
                "sigma_1_5": {"r_max": self.cfg.r_max, "diff": diff15, "octave": g15.err_octave},
                "drift_1_1": {"drift": drift, "octave_r_half": g40.err_octave},
                "circle": {"diff": circle.diff, "budget": circle.budget, "r_max": rm},
                "conjugation": {"diff": conj_diff},
                "exponent_fit": fits,
            }),
        ))
    }

    fn c11(&mut self) -> Result<(bool, Value)> {
        let r = lfun::riesz_check(self.bundle(), 0.6, 1000, 100_000)?;
        let signs = lfun::sign_changes(self.bundle(), 10_000)?;
        let pass = r.pass && signs.changes > 0;
        Ok((pass, json!({"C": r.c, "worst_ratio": r.worst_ratio, "worst_x": r.worst_x, "sign_changes_1e4": signs.changes})))
    }

    fn c12(&mut self) -> Result<(bool, Value)> {
        let ell = self.cfg.ell;
        let primes = &self.cfg.primes;
        let a = hecke::extract_eigenform(ell, primes, 20_000, self.cfg.parallel)?;
        let b2 = hecke::extract_eigenform(ell, primes, 40_000, self.cfg.parallel)?;
        let mut omega_drift = 0.0f64;
        for (p, w) in &a.omega {
            let w2 = b2.omega.get(p).copied().unwrap_or(f64::NAN);
            omega_drift = omega_drift.max((w - w2).abs());
        }
        let omega_ok = omega_drift <= 1e-9;

        let seq = hecke::extract_eigenform(ell, primes, 20_000, false)?;
        let par_bundle = hecke::extract_eigenform(ell, primes, 20_000, true)?;
        let bundle_same = seq.to_json()? == par_bundle.to_json()?;

        let pts = [Complex64::new(1.2, 0.0), Complex64::new(0.8, 5.0)];
        let g1 = serde_json::to_string(&lfun::lflat_grid(self.bundle(), &pts, 20, &self.cfg.afe, false)?)?;
        let g2 = serde_json::to_string(&lfun::lflat_grid(self.bundle(), &pts, 20, &self.cfg.afe, true)?)?;
        let grid_same = g1 == g2;

        let c1 = serde_json::to_string(&charsum::verify_grid(ell, 100, 20, false)?)?;
        let c2 = serde_json::to_string(&charsum::verify_grid(ell, 100, 20, true)?)?;
        let charsum_same = c1 == c2;

        let th = QExpansion::numeric(2 * ell + 1, 4, a.unnormalized(Family::F)).truncate(4000);
        let w1 = serde_json::to_string(&hecke::w4(&th, 40, false)?.expansion.to_complex())?;
        let w2 = serde_json::to_string(&hecke::w4(&th, 40, true)?.expansion.to_complex())?;
        let fft_same = w1 == w2;

        let pass = omega_ok && bundle_same && grid_same && charsum_same && fft_same;
        Ok((
            pass,
            json!({
                "omega_drift": omega_drift,
                "bundle_identical": bundle_same,
                "lflat_grid_identical": grid_same,
                "charsum_identical": charsum_same,
                "fft_identical": fft_same,
                "parallel_compiled": par::available(),
            }),
        ))
    }
}

/// Build the context and run all criteria in order.
pub fn run(cfg: SelftestConfig) -> Result<SelftestReport> {
    let t0 = Instant::now();
    let mut ctx = Context::new(cfg.clone())?;
    let setup = t0.elapsed().as_secs_f64();
    let criteria = (1..=12).map(|id| ctx.run(id)).collect::<Result<Vec<_>>>()?;
    Ok(SelftestReport {
        config: cfg,
        setup_seconds: setup,
        criteria,
    })
}
