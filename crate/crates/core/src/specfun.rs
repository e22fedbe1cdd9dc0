//! Gamma, fractional-order Bessel K, the rescaled Bessel function Ψ_ν and the
//! closed-form singular cosine integrals.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Trapezoid step for the cosh-integral representation of K_ν.
const BESSEL_STEP: f64 = 1.0 / 16.0;
const BESSEL_MAX_TERMS: usize = 200_000;

fn check_positive(x: f64, what: &str) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::domain(format!("{what} must be finite and > 0, got {x}")));
    }
    Ok(())
}

fn lanczos_series(x: f64) -> (f64, f64) {
    // x ≥ 0.5; returns (series sum, t).
    let x = x - 1.0;
    let mut a = LANCZOS_COEFFS[0];
    for (i, c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (a, x + LANCZOS_G + 0.5)
}

/// Euler Gamma function for x > 0.
pub fn gamma(x: f64) -> Result<f64> {
    check_positive(x, "gamma argument")?;
    Ok(gamma_unchecked(x))
}

fn gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_unchecked(1.0 - x));
    }
    if x > 140.0 {
        return ln_gamma_unchecked(x).exp();
    }
    let (a, t) = lanczos_series(x);
    (2.0 * PI).sqrt() * t.powf(x - 0.5) * (-t).exp() * a
}

/// Natural logarithm of Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    check_positive(x, "ln_gamma argument")?;
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        return PI.ln() - (PI * x).sin().ln() - ln_gamma_unchecked(1.0 - x);
    }
    let (a, t) = lanczos_series(x);
    0.5 * (2.0 * PI).ln() + (x - 0.5) * t.ln() - t + a.ln()
}

fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
}

/// h·Σ' exp(log_pref − z(cosh t − 1) + ln cosh(νt)) over t = nh, n ≥ 0, the
/// n = 0 term halved. Equals e^{z}·K_ν(z)·e^{log_pref}.
fn cosh_integral(nu: f64, z: f64, log_pref: f64) -> f64 {
    let h = BESSEL_STEP;
    let t_peak = (nu / z).asinh();
    let mut sum = 0.5 * log_pref.exp();
    for n in 1..BESSEL_MAX_TERMS {
        let t = n as f64 * h;
        let s = (0.5 * t).sinh();
        let term = (log_pref - 2.0 * z * s * s + ln_cosh(nu * t)).exp();
        sum += term;
        if t > t_peak && term <= 1e-18 * sum {
            break;
        }
    }
    h * sum
}

/// Modified Bessel function of the second kind K_ν(z), z > 0.
/// Real orders use K_{−ν} = K_ν.
pub fn bessel_k(nu: f64, z: f64) -> Result<f64> {
    if !nu.is_finite() {
        return Err(Error::domain(format!("Bessel order must be finite, got {nu}")));
    }
    check_positive(z, "Bessel argument")?;
    Ok(cosh_integral(nu.abs(), z, -z))
}

/// Exponentially scaled K_ν: e^{z} K_ν(z).
pub fn bessel_k_scaled(nu: f64, z: f64) -> Result<f64> {
    if !(nu.is_finite() && nu >= 0.0) {
        return Err(Error::domain(format!("Bessel order must be ≥ 0, got {nu}")));
    }
    check_positive(z, "Bessel argument")?;
    Ok(cosh_integral(nu, z, 0.0))
}

/// Ψ_ν(z) = 2(z/2)^ν K_ν(z), with the limit Ψ_ν(0) = Γ(ν).
pub fn psi(nu: f64, z: f64) -> Result<f64> {
    check_positive(nu, "psi order")?;
    if !(z.is_finite() && z >= 0.0) {
        return Err(Error::domain(format!("psi argument must be ≥ 0, got {z}")));
    }
    if z == 0.0 {
        return gamma(nu);
    }
    Ok(2.0 * cosh_integral(nu, z, nu * (0.5 * z).ln() - z))
}

/// F_ν(ξ; c) = ∫_ℝ cos(ξs)(s² + c²)^{−ν/2} ds.
pub fn f_nu(nu: f64, xi: f64, c: f64) -> Result<f64> {
    if !(nu.is_finite() && nu > 1.0) {
        return Err(Error::Divergent(format!("F_ν needs ν > 1, got {nu}")));
    }
    check_positive(c, "F_ν width")?;
    if !xi.is_finite() {
        return Err(Error::domain(format!("F_ν frequency must be finite, got {xi}")));
    }
    let mu = 0.5 * (nu - 1.0);
    let pref = PI.sqrt() / (c.powf(nu - 1.0) * gamma_unchecked(0.5 * nu));
    let body = if xi == 0.0 {
        gamma_unchecked(mu)
    } else {
        psi(mu, c * xi.abs())?
    };
    Ok(pref * body)
}

/// B = √π Γ((1+α)/2) / Γ((2+α)/2) = ∫_ℝ (1+w²)^{−(2+α)/2} dw.
pub fn tail_constant(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(PI.sqrt() * gamma_unchecked(0.5 * (1.0 + alpha)) / gamma_unchecked(0.5 * (2.0 + alpha)))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!("α must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// The three singular cosine integrals
/// `I = ∫(3 − 4cos s + cos 2s)|s|^{−4−α}`, `J = ∫(1 − cos 2s)|s|^{−2−α}` and
/// `C = ∫(1 − cos s)|s|^{−2−α}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SingularIntegrals {
    pub i: f64,
    pub j: f64,
    pub c: f64,
}

/// Γ((1−α)/2), guarded against overflow as α ↑ 1.
pub fn gamma_half_one_minus_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let x = 0.5 * (1.0 - alpha);
    let lg = ln_gamma_unchecked(x);
    if lg > 700.0 {
        return Err(Error::domain(format!("Γ((1−α)/2) overflows at α = {alpha}")));
    }
    Ok(gamma_unchecked(x))
}

pub fn singular_cosine_integrals(alpha: f64) -> Result<SingularIntegrals> {
    let g1 = gamma_half_one_minus_alpha(alpha)?;
    let g2 = gamma_unchecked(0.5 * (2.0 + alpha));
    let sp = PI.sqrt();
    let i = (8.0 - 2f64.powf(2.0 - alpha)) * sp * g1 / ((3.0 + alpha) * (2.0 + alpha) * (1.0 + alpha) * g2);
    let j = 2.0 * sp * g1 / ((1.0 + alpha) * g2);
    let c = 2f64.powf(-1.0 - alpha) * j;
    Ok(SingularIntegrals { i, j, c })
}
