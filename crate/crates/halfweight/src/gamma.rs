//! Complex log-Gamma (Lanczos, g = 607/128, 15 terms) and the archimedean
//! factor L∞(s) = (2π)^{−s} Γ(s + ℓ/2 − 1/4).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_747,
    -0.491_913_816_097_620_2,
    0.339_946_499_848_118_9e-4,
    0.465_236_289_270_485_76e-4,
    -0.983_744_753_048_795_6e-4,
    0.158_088_703_224_912_49e-3,
    -0.210_264_441_724_104_88e-3,
    0.217_439_618_115_212_64e-3,
    -0.164_318_106_536_763_9e-3,
    0.844_182_239_838_527_4e-4,
    -0.261_908_384_015_814_1e-4,
    0.368_991_826_595_316_2e-5,
];
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn near_pole(z: Complex64) -> bool {
    z.re <= 0.5 && (z.re - z.re.round()).abs() < 1e-14 && z.im.abs() < 1e-14 && z.re.round() <= 0.0
}

/// ln Γ(z) on a branch continuous along horizontal lines; exp(ln_gamma)
/// is Γ(z). Fails at the poles z = 0, −1, −2, ….
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if near_pole(z) {
        return Err(Error::Pole { re: z.re, im: z.im });
    }
    if z.re < 0.5 {
        // Γ(z)Γ(1 − z) = π / sin(πz).
        let s = (z * PI).sin();
        return Ok(Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(Complex64::new(1.0, 0.0) - z)?);
    }
    let x = z - 1.0;
    let mut ser = Complex64::new(LANCZOS[0], 0.0);
    for (j, c) in LANCZOS.iter().enumerate().skip(1) {
        ser += *c / (x + j as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    Ok((x + 0.5) * t.ln() - t + LN_SQRT_2PI + ser.ln())
}

pub fn gamma(z: Complex64) -> Result<Complex64> {
    Ok(ln_gamma(z)?.exp())
}

/// ln L∞(s) = −s ln 2π + ln Γ(s + ℓ/2 − 1/4).
pub fn ln_gamma_factor(s: Complex64, ell: u32) -> Result<Complex64> {
    Ok(-s * (2.0 * PI).ln() + ln_gamma(s + (ell as f64 / 2.0 - 0.25))?)
}

/// L∞(s) = (2π)^{−s} Γ(s + ℓ/2 − 1/4).
pub fn gamma_factor(s: Complex64, ell: u32) -> Result<Complex64> {
    Ok(ln_gamma_factor(s, ell)?.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_and_half_values() {
        for n in 1..20u32 {
            let f: f64 = (1..n).map(|k| k as f64).product();
            let g = gamma(Complex64::new(n as f64, 0.0)).unwrap();
            assert!((g.re / f - 1.0).abs() < 1e-14, "n = {n}");
        }
        let g = gamma(Complex64::new(0.5, 0.0)).unwrap();
        assert!((g.re - PI.sqrt()).abs() < 1e-14);
        let g = gamma(Complex64::new(-0.5, 0.0)).unwrap();
        assert!((g.re + 2.0 * PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn poles_rejected() {
        assert!(gamma(Complex64::new(0.0, 0.0)).is_err());
        assert!(gamma(Complex64::new(-3.0, 0.0)).is_err());
    }

    #[test]
    fn known_complex_value() {
        // |Γ(1/2 + it)|² = π / cosh(πt).
        for t in [0.3, 2.0, 10.0, 30.0] {
            let g = gamma(Complex64::new(0.5, t)).unwrap();
            let want = PI / (PI * t).cosh();
            assert!((g.norm_sqr() / want - 1.0).abs() < 1e-12, "t = {t}");
        }
    }
}
