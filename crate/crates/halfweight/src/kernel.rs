//! Smooth cutoff kernels of the approximate functional equation.
//!
//! With H(z) = exp(κz²) and R_s(z) = L∞(1−s+z)/L∞(s−z):
//!
//! V(y)   = (1/2πi) ∫_{(c)} y^{−z} H(z) dz/z,
//! W_s(Y) = (1/2πi) ∫_{(c)} R_s(z) Y^{−z} H(z) dz/z,
//! V_{s,T}(y) = T^{2s−1} W_s(yT²).
//!
//! For log Y ≥ 0 the integral runs on Re z = abscissa. For log Y < 0 it
//! runs left of 0, between 0 and the first pole of R_s, and picks up the
//! residue R_s(0). Either way |Y^{−z}| ≤ 1 on the line. Each kernel is
//! tabulated once on Chebyshev panels in x = log Y.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gamma::ln_gamma_factor;

/// Contour, truncation and tabulation parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AfeConfig {
    /// Balance parameter; None selects max(4, |Im s|).
    pub t: Option<f64>,
    /// Real part of the right contour.
    pub abscissa: f64,
    /// Contour truncation |Im z| ≤ z_max.
    pub z_max: f64,
    /// Trapezoid step (reduced automatically near singularities).
    pub step: f64,
    /// H(z) = exp(κ z²).
    pub kappa: f64,
    /// Kernels are cut where they fall below kernel_tol times their sup.
    pub kernel_tol: f64,
    /// Chebyshev panel width in log Y.
    pub panel_width: f64,
    /// Chebyshev nodes per panel.
    pub panel_nodes: usize,
}

impl Default for AfeConfig {
    fn default() -> Self {
        AfeConfig {
            t: None,
            abscissa: 2.0,
            z_max: 32.0,
            step: 0.05,
            kappa: 1.0 / 16.0,
            kernel_tol: 1e-14,
            panel_width: 0.25,
            panel_nodes: 24,
        }
    }
}

impl AfeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if let Some(t) = self.t {
            if !(t >= 1.0 && t.is_finite()) {
                return bad("T must be >= 1");
            }
        }
        if !(self.abscissa > 0.0 && self.step > 0.0 && self.kappa > 0.0 && self.z_max > 0.0) {
            return bad("abscissa, step, kappa and z_max must be positive");
        }
        if self.kappa * (self.abscissa.powi(2) - self.z_max.powi(2)) >= (1e-24f64).ln() {
            return bad("contour tail exp(κ(c² − Z²)) must be below 1e-24");
        }
        if !(self.kernel_tol > 0.0 && self.kernel_tol < 1e-3) {
            return bad("kernel_tol must lie in (0, 1e-3)");
        }
        if !(self.panel_width > 0.0 && self.panel_nodes >= 4) {
            return bad("panel_width must be positive and panel_nodes >= 4");
        }
        Ok(())
    }

    /// T used at spectral point s.
    pub fn balance(&self, s: Complex64) -> f64 {
        self.t.unwrap_or_else(|| s.im.abs().max(4.0))
    }
}

/// A kernel value with its quadrature error estimate.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelValue {
    pub value: Complex64,
    pub err: f64,
}

/// Error budget of a tabulated kernel, absolute.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct KernelDiag {
    /// max over nodes of |I_h − I_{2h}|.
    pub quad: f64,
    /// Chebyshev tail, max over panels of the last two coefficients.
    pub interp: f64,
    /// Contour truncation at |Im z| = z_max.
    pub trunc: f64,
    /// Largest value dropped outside the table.
    pub cut: f64,
}

impl KernelDiag {
    pub fn total(&self) -> f64 {
        self.quad + self.interp + self.trunc + self.cut
    }
}

/// Samples of g(z) = R(z)H(z)/z on one vertical line.
struct Line {
    c: f64,
    h: f64,
    g: Vec<Complex64>,
    residue: Complex64,
    trunc: f64,
}

impl Line {
    fn new(c: f64, h: f64, cfg: &AfeConfig, residue: Complex64, r: &dyn Fn(Complex64) -> Result<Complex64>) -> Result<Line> {
        let j = (cfg.z_max / h).ceil() as i64;
        let mut g = Vec::with_capacity(2 * j as usize + 1);
        for k in -j..=j {
            let z = Complex64::new(c, k as f64 * h);
            g.push(r(z)? * (z * z * cfg.kappa).exp() / z);
        }
        // Gaussian tail beyond the last node.
        let zt = j as f64 * h;
        let edge = g[0].norm().max(g[g.len() - 1].norm());
        let trunc = edge / (2.0 * PI) / (2.0 * cfg.kappa * zt);
        Ok(Line { c, h, g, residue, trunc })
    }

    /// (value, |I_h − I_{2h}|) at x = log Y.
    fn eval(&self, x: f64) -> (Complex64, f64) {
        let j = (self.g.len() / 2) as i64;
        let mut all = Complex64::default();
        let mut even = Complex64::default();
        let step = Complex64::from_polar(1.0, -self.h * x);
        let mut w = Complex64::default();
        for (idx, gk) in self.g.iter().enumerate() {
            let k = idx as i64 - j;
            if idx % 32 == 0 {
                w = Complex64::from_polar(1.0, -(k as f64) * self.h * x);
            }
            let t = gk * w;
            all += t;
            if k % 2 == 0 {
                even += t;
            }
            w *= step;
        }
        let scale = (-self.c * x).exp() * self.h / (2.0 * PI);
        let v = all * scale + self.residue;
        let e = (all - even * 2.0).norm() * scale;
        (v, e)
    }
}

/// Right and left contour representations of one kernel.
struct Contours {
    right: Line,
    left: Line,
}

impl Contours {
    fn eval(&self, x: f64) -> (Complex64, f64) {
        if x >= 0.0 {
            self.right.eval(x)
        } else {
            self.left.eval(x)
        }
    }

    fn trunc(&self) -> f64 {
        self.right.trunc.max(self.left.trunc)
    }
}

fn h_for(cfg: &AfeConfig, dist: f64) -> f64 {
    cfg.step.min(dist / 6.0)
}

fn v_contours(cfg: &AfeConfig) -> Result<Contours> {
    cfg.validate()?;
    let one = |_: Complex64| Ok(Complex64::new(1.0, 0.0));
    let c = cfg.abscissa;
    Ok(Contours {
        right: Line::new(c, h_for(cfg, c), cfg, Complex64::default(), &one)?,
        left: Line::new(-c, h_for(cfg, c), cfg, Complex64::new(1.0, 0.0), &one)?,
    })
}

/// R_s(z) = L∞(1−s+z)/L∞(s−z).
pub fn r_s(s: Complex64, ell: u32, z: Complex64) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    Ok((ln_gamma_factor(one - s + z, ell)? - ln_gamma_factor(s - z, ell)?).exp())
}

/// Real part of the rightmost pole of R_s.
pub fn first_pole(s: Complex64, ell: u32) -> f64 {
    s.re - 0.75 - ell as f64 / 2.0
}

fn w_contours(s: Complex64, ell: u32, cfg: &AfeConfig) -> Result<Contours> {
    cfg.validate()?;
    let p0 = first_pole(s, ell);
    if p0 > -0.1 || cfg.abscissa < p0 + 0.25 {
        return Err(Error::Pole { re: p0, im: s.im });
    }
    let cl = if p0 > -1.0 { p0 / 2.0 } else { p0 + 0.5 };
    let dist_left = (-cl).min(cl - p0);
    let r = |z: Complex64| r_s(s, ell, z);
    let residue = r_s(s, ell, Complex64::default())?;
    let cr = cfg.abscissa;
    Ok(Contours {
        right: Line::new(cr, h_for(cfg, cr.min(cr - p0)), cfg, Complex64::default(), &r)?,
        left: Line::new(cl, h_for(cfg, dist_left), cfg, residue, &r)?,
    })
}

/// V(y), evaluated directly on the contour.
pub fn v_kernel(y: f64, cfg: &AfeConfig) -> Result<KernelValue> {
    if !(y > 0.0) {
        return Err(Error::InvalidArgument("V needs y > 0".into()));
    }
    let (value, err) = v_contours(cfg)?.eval(y.ln());
    Ok(KernelValue { value, err })
}

/// V_{s,T}(y) = T^{2s−1} W_s(yT²), evaluated directly on the contour.
pub fn v_st_kernel(y: f64, s: Complex64, t: f64, ell: u32, cfg: &AfeConfig) -> Result<KernelValue> {
    if !(y > 0.0 && t > 0.0) {
        return Err(Error::InvalidArgument("V_{s,T} needs y > 0 and T > 0".into()));
    }
    let (w, err) = w_contours(s, ell, cfg)?.eval(y.ln() + 2.0 * t.ln());
    let f = ((s * 2.0 - 1.0) * t.ln()).exp();
    Ok(KernelValue {
        value: w * f,
        err: err * f.norm(),
    })
}

/// A kernel tabulated on Chebyshev panels over x = log Y ∈ [lo, hi].
/// Below lo it equals `left_value`, above hi it is dropped.
#[derive(Clone, Debug)]
pub struct KernelTable {
    lo: f64,
    hi: f64,
    width: f64,
    panels: Vec<Vec<Complex64>>,
    left_value: Complex64,
    sup: f64,
    pub diag: KernelDiag,
}

const MAX_PANELS: usize = 1000;

fn cheb_nodes(n: usize) -> Vec<f64> {
    (0..n).map(|k| (PI * k as f64 / (n - 1) as f64).cos()).collect()
}

/// Chebyshev coefficients from values at the Lobatto nodes cos(πk/(n−1)).
fn cheb_coeffs(vals: &[Complex64]) -> Vec<Complex64> {
    let n = vals.len();
    let m = (n - 1) as f64;
    (0..n)
        .map(|j| {
            let mut s = Complex64::default();
            for (k, v) in vals.iter().enumerate() {
                let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
                s += v * (w * (PI * (j * k) as f64 / m).cos());
            }
            let w = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            s * (2.0 * w / m)
        })
        .collect()
}

fn clenshaw(c: &[Complex64], t: f64) -> Complex64 {
    let mut b1 = Complex64::default();
    let mut b2 = Complex64::default();
    for ck in c.iter().skip(1).rev() {
        let b0 = ck + b1 * (2.0 * t) - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + b1 * t - b2
}

impl KernelTable {
    /// Table of V.
    pub fn v(cfg: &AfeConfig) -> Result<KernelTable> {
        Self::build(&v_contours(cfg)?, cfg)
    }

    /// Table of W_s.
    pub fn w(s: Complex64, ell: u32, cfg: &AfeConfig) -> Result<KernelTable> {
        Self::build(&w_contours(s, ell, cfg)?, cfg)
    }

    fn build(ct: &Contours, cfg: &AfeConfig) -> Result<KernelTable> {
        let n = cfg.panel_nodes;
        let w = cfg.panel_width;
        let nodes = cheb_nodes(n);
        let residue = ct.left.residue;
        let mut quad = 0.0f64;
        let mut sup = residue.norm();
        let panel = |k: i64, quad: &mut f64, sup: &mut f64| -> (Vec<Complex64>, f64) {
            let a = k as f64 * w;
            let vals: Vec<Complex64> = nodes
                .iter()
                .map(|t| {
                    let (v, e) = ct.eval(a + (t + 1.0) * 0.5 * w);
                    *quad = quad.max(e);
                    *sup = sup.max(v.norm());
                    v
                })
                .collect();
            let dev = vals.iter().map(|v| (v - if k < 0 { residue } else { Complex64::default() }).norm());
            let m = dev.fold(0.0, f64::max);
            (cheb_coeffs(&vals), m)
        };
        let mut right = Vec::new();
        let mut right_tail = Vec::new();
        for k in 0.. {
            if k as usize >= MAX_PANELS {
                return Err(Error::Invariant("kernel does not decay on the right".into()));
            }
            let (c, m) = panel(k, &mut quad, &mut sup);
            right.push(c);
            right_tail.push(m);
            if m < cfg.kernel_tol * sup * 1e-2 {
                break;
            }
        }
        let mut left = Vec::new();
        let mut left_tail = Vec::new();
        for k in 1.. {
            if k as usize >= MAX_PANELS {
                return Err(Error::Invariant("kernel does not settle on the left".into()));
            }
            let (c, m) = panel(-k, &mut quad, &mut sup);
            left.push(c);
            left_tail.push(m);
            if m < cfg.kernel_tol * sup * 1e-2 {
                break;
            }
        }
        // Trim panels whose deviation stays below kernel_tol·sup.
        let tol = cfg.kernel_tol * sup;
        while right.len() > 1 && right_tail[right.len() - 1] < tol && right_tail[right.len() - 2] < tol {
            right.pop();
            right_tail.pop();
        }
        while left.len() > 1 && left_tail[left.len() - 1] < tol && left_tail[left.len() - 2] < tol {
            left.pop();
            left_tail.pop();
        }
        let cut = right_tail.last().copied().unwrap_or(0.0).max(left_tail.last().copied().unwrap_or(0.0));
        let lo = -(left.len() as f64) * w;
        let hi = right.len() as f64 * w;
        left.reverse();
        left.extend(right);
        let interp = left
            .iter()
            .map(|c| c[n - 1].norm() + c[n - 2].norm())
            .fold(0.0, f64::max);
        Ok(KernelTable {
            lo,
            hi,
            width: w,
            panels: left,
            left_value: residue,
            sup,
            diag: KernelDiag {
                quad,
                interp,
                trunc: ct.trunc(),
                cut,
            },
        })
    }

    /// Value at x = log Y.
    pub fn eval_log(&self, x: f64) -> Complex64 {
        if x < self.lo {
            return self.left_value;
        }
        if x >= self.hi {
            return Complex64::default();
        }
        let k = (((x - self.lo) / self.width) as usize).min(self.panels.len() - 1);
        let a = self.lo + k as f64 * self.width;
        let t = (2.0 * (x - a) / self.width - 1.0).clamp(-1.0, 1.0);
        clenshaw(&self.panels[k], t)
    }

    pub fn eval(&self, y: f64) -> Complex64 {
        self.eval_log(y.ln())
    }

    /// Beyond this Y the kernel is treated as zero.
    pub fn support_end(&self) -> f64 {
        self.hi.exp()
    }

    /// Below this Y the kernel is treated as its limit value.
    pub fn plateau_end(&self) -> f64 {
        self.lo.exp()
    }

    /// The y → 0 limit (1 for V, R_s(0) for W_s).
    pub fn limit(&self) -> Complex64 {
        self.left_value
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_reproduces_polynomial() {
        let nodes = cheb_nodes(12);
        let f = |x: f64| Complex64::new(3.0 * x.powi(5) - x, x * x);
        let c = cheb_coeffs(&nodes.iter().map(|&x| f(x)).collect::<Vec<_>>());
        for x in [-0.9, -0.3, 0.0, 0.41, 1.0] {
            assert!((clenshaw(&c, x) - f(x)).norm() < 1e-13);
        }
    }

    #[test]
    fn config_invariant() {
        let mut cfg = AfeConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.z_max = 8.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn w_rejects_pole_near_contour() {
        let cfg = AfeConfig::default();
        assert!(KernelTable::w(Complex64::new(2.0, 0.0), 2, &cfg).is_err());
    }
}
