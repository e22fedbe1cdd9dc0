//! The straight band {|z₂| < R}: its curvature h_R, the eigenvalues μ_k(R) of
//! the linearized operator, the bifurcation radii R_m = R₁/m and the
//! stability verdict.

use crate::error::{Error, Result};
use crate::kernel::{g_complement, KernelParams};
use crate::quadrature::{PvRule, QuadratureSpec};
use crate::specfun::{f_nu, singular_cosine_integrals};

fn check_radius(r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::domain(format!("radius must be finite and > 0, got {r}")));
    }
    Ok(())
}

/// h_R = 2B(2R)^{−α}/α.
pub fn h_r(p: &KernelParams, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(2.0 * p.tail_constant * (2.0 * r).powf(-p.alpha) / p.alpha)
}

/// dh_R/dR = −α h_R / R.
pub fn h_r_derivative(p: &KernelParams, r: f64) -> Result<f64> {
    Ok(-p.alpha * h_r(p, r)? / r)
}

/// μ_k(R) = k^{1+α} C_α − F_{2+α}(0; 2R) − F_{2+α}(k; 2R).
pub fn mu_k(p: &KernelParams, r: f64, k: usize) -> Result<f64> {
    check_radius(r)?;
    let a = p.alpha;
    let c = 2.0 * r;
    let nu = 2.0 + a;
    let local = if k == 0 {
        0.0
    } else {
        (k as f64).powf(1.0 + a) * singular_cosine_integrals(a)?.c
    };
    Ok(local - f_nu(nu, 0.0, c)? - f_nu(nu, k as f64, c)?)
}

/// h_R = 2∫_ℝ {G(t, ∞) − G(t, 2R)} dt by quadrature.
pub fn h_r_quadrature(p: &KernelParams, r: f64) -> Result<f64> {
    check_radius(r)?;
    // slowly decaying, non-oscillatory integrand: many cheap blocks
    let spec = QuadratureSpec {
        period_blocks: 1024,
        nodes_per_block: 16,
        ..QuadratureSpec::new(0.0, 1.0 + p.alpha).with_frequency(0.0)
    };
    let rule = PvRule::new(&spec)?;
    let v = rule.integrate_pairs_checked(|t| 2.0 * g_complement(p, t, 2.0 * r).unwrap_or(f64::NAN))?;
    Ok(2.0 * v)
}

/// μ_k(R) = ∫(1 − cos kt) K(t, 0) dt − ∫(1 + cos kt) K(t, 2R) dt by quadrature.
pub fn mu_k_quadrature(p: &KernelParams, r: f64, k: usize) -> Result<f64> {
    check_radius(r)?;
    let a = p.alpha;
    let kf = k as f64;
    let c2 = 4.0 * r * r;
    let beta = p.beta();
    let spec = QuadratureSpec::new(a, 2.0 + a).with_frequency(kf);
    let rule = PvRule::new(&spec)?;
    rule.integrate_pairs_checked(|t| {
        let s = (0.5 * kf * t).sin() / t;
        let local = 2.0 * s * s * t.powf(-a);
        let band = (1.0 + (kf * t).cos()) * (t * t + c2).powf(-beta);
        2.0 * (local - band)
    })
}

/// Eigenvalues μ_0(R), …, μ_K(R) at one radius.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpectrumRow {
    pub radius: f64,
    pub eigenvalues: Vec<f64>,
    pub k_max: usize,
}

pub fn spectrum_row(p: &KernelParams, r: f64, k_max: usize) -> Result<SpectrumRow> {
    let eigenvalues = (0..=k_max).map(|k| mu_k(p, r, k)).collect::<Result<Vec<_>>>()?;
    Ok(SpectrumRow {
        radius: r,
        eigenvalues,
        k_max,
    })
}

/// Brent's method on a sign-changing bracket.
pub(crate) fn brent(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, xtol: f64) -> Result<f64> {
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracketing { lo: a, hi: b });
    }
    let (mut c, mut fc) = (b, fb);
    let (mut d, mut e) = (b - a, b - a);
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut pp, mut q);
            if a == c {
                pp = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                pp = s * (2.0 * xm * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if pp > 0.0 {
                q = -q;
            }
            pp = pp.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * pp < min1.min(min2) {
                e = d;
                d = pp / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b)?;
    }
    Err(Error::NoConvergence {
        message: "Brent iteration limit".into(),
        estimate: b,
        error: (c - b).abs(),
    })
}

pub const DEFAULT_BRACKET: (f64, f64) = (1e-3, 10.0);
pub const DEFAULT_RADIUS_TOL: f64 = 1e-12;
const MAX_EXPANSIONS: usize = 20;

/// R₁, the unique zero of the increasing map R ↦ μ₁(R), to relative
/// tolerance `tol` in R.
pub fn find_r1(p: &KernelParams, bracket_lo: f64, bracket_hi: f64, tol: f64) -> Result<f64> {
    check_radius(bracket_lo)?;
    check_radius(bracket_hi)?;
    let (mut lo, mut hi) = (bracket_lo.min(bracket_hi), bracket_lo.max(bracket_hi));
    let mu1 = |r: f64| mu_k(p, r, 1);
    let mut n = 0;
    while mu1(lo)? >= 0.0 {
        if n == MAX_EXPANSIONS {
            return Err(Error::Bracketing { lo, hi });
        }
        lo *= 0.5;
        n += 1;
    }
    let mut n = 0;
    while mu1(hi)? <= 0.0 {
        if n == MAX_EXPANSIONS {
            return Err(Error::Bracketing { lo, hi });
        }
        hi *= 2.0;
        n += 1;
    }
    brent(mu1, lo, hi, tol * lo)
}

/// R₁ with the default bracket and tolerance.
pub fn r1(p: &KernelParams) -> Result<f64> {
    find_r1(p, DEFAULT_BRACKET.0, DEFAULT_BRACKET.1, DEFAULT_RADIUS_TOL)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BifurcationRadii {
    pub alpha: f64,
    pub r1: f64,
    /// R_m = R₁/m for m = 1..M.
    pub radii: Vec<f64>,
}

pub fn bifurcation_radii(p: &KernelParams, m_max: usize) -> Result<BifurcationRadii> {
    let r1 = r1(p)?;
    Ok(BifurcationRadii {
        alpha: p.alpha,
        r1,
        radii: (1..=m_max).map(|m| r1 / m as f64).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Verdict {
    Stable,
    Unstable,
    Degenerate,
}

/// Stability of the straight band: the sign of μ₁(R).
pub fn classify_straight(p: &KernelParams, r: f64, tol: f64) -> Result<Verdict> {
    let m = mu_k(p, r, 1)?;
    Ok(if m > tol {
        Verdict::Stable
    } else if m < -tol {
        Verdict::Unstable
    } else {
        Verdict::Degenerate
    })
}
