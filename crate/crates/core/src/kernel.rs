//! The kernel K(z) = |z|^{−2−α}, its z₂-derivatives, the antiderivative
//! G(t, v) = ∫₀^v K(t, τ) dτ and the branch kernels 𝒦₋, 𝒦₀.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::nmc::CosineSeries;
use crate::quadrature::gauss_legendre;
use crate::specfun;

type Rule = (Vec<f64>, Vec<f64>);

fn rules() -> &'static [Rule; 3] {
    static RULES: OnceLock<[Rule; 3]> = OnceLock::new();
    RULES.get_or_init(|| [gauss_legendre(8), gauss_legendre(16), gauss_legendre(32)])
}

/// The fractional order α and constants derived from it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KernelParams {
    pub alpha: f64,
    /// B = √π Γ((1+α)/2)/Γ((2+α)/2) = ∫_ℝ (1+w²)^{−(2+α)/2} dw.
    pub tail_constant: f64,
}

impl KernelParams {
    pub fn new(alpha: f64) -> Result<Self> {
        let tail_constant = specfun::tail_constant(alpha)?;
        Ok(Self { alpha, tail_constant })
    }

    /// (2+α)/2
    #[inline]
    pub fn beta(&self) -> f64 {
        0.5 * (2.0 + self.alpha)
    }

    /// ∫₀^x (1+w²)^{−(2+α)/2} dw.
    pub fn g_unit(&self, x: f64) -> f64 {
        if x < 0.0 {
            -self.g_unit_pos(-x)
        } else {
            self.g_unit_pos(x)
        }
    }

    fn g_unit_pos(&self, x: f64) -> f64 {
        if x <= 1.0 {
            self.gl_segment(0.0, x)
        } else {
            0.5 * self.tail_constant - self.complement_series(x)
        }
    }

    /// ∫_x^∞ (1+w²)^{−(2+α)/2} dw for x ≥ 1, by the series in X = (1+x²)^{−1/2}.
    fn complement_series(&self, x: f64) -> f64 {
        let x2 = 1.0 / (1.0 + x * x);
        let lead = x2.powf(0.5 * (1.0 + self.alpha));
        let mut coef = 1.0;
        let mut pow = 1.0;
        let mut sum = 0.0;
        for k in 0..200 {
            let kf = k as f64;
            let term = coef * pow / (self.alpha + 2.0 * kf + 1.0);
            sum += term;
            if term <= 1e-17 * sum {
                break;
            }
            coef *= (2.0 * kf + 1.0) / (2.0 * kf + 2.0);
            pow *= x2;
        }
        lead * sum
    }

    fn gl_segment(&self, lo: f64, hi: f64) -> f64 {
        let d = hi - lo;
        if d == 0.0 {
            return 0.0;
        }
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let rule = if d <= 0.1 * scale {
            &rules()[0]
        } else if d <= 0.5 * scale {
            &rules()[1]
        } else {
            &rules()[2]
        };
        let beta = self.beta();
        let (c, h) = (0.5 * (lo + hi), 0.5 * d);
        let mut s = 0.0;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let y = c + h * x;
            s += w * (-beta * (y * y).ln_1p()).exp();
        }
        s * h
    }

    /// g(hi) − g(lo) for the unit-t antiderivative, without cancellation.
    pub fn g_unit_between(&self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return 0.0;
        }
        if lo > hi {
            return -self.g_unit_between(hi, lo);
        }
        if hi <= 0.0 {
            return self.g_unit_between(-hi, -lo);
        }
        if lo < 0.0 {
            return self.g_unit_pos(hi) + self.g_unit_pos(-lo);
        }
        // 0 ≤ lo < hi
        if hi <= 1.0 {
            return self.gl_segment(lo, hi);
        }
        if lo >= 1.0 {
            if hi - lo <= 0.5 * lo {
                return self.gl_segment(lo, hi);
            }
            return self.complement_series(lo) - self.complement_series(hi);
        }
        self.gl_segment(lo, 1.0) + self.complement_series(1.0) - self.complement_series(hi)
    }

    /// g(c + h) − g(c − h), accurate when h is small against c.
    pub fn g_unit_centered(&self, c: f64, h: f64) -> f64 {
        let h_abs = h.abs();
        if h_abs > 0.05 * c.abs().max(1.0) {
            return self.g_unit_between(c - h, c + h);
        }
        if h == 0.0 {
            return 0.0;
        }
        let beta = self.beta();
        let rule = &rules()[0];
        let mut s = 0.0;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            let y = c + h * x;
            s += w * (-beta * (y * y).ln_1p()).exp();
        }
        s * h
    }

    /// ∫_x^∞ (1+w²)^{−(2+α)/2} dw.
    pub fn g_unit_complement(&self, x: f64) -> f64 {
        if x >= 1.0 {
            self.complement_series(x)
        } else if x >= 0.0 {
            0.5 * self.tail_constant - self.gl_segment(0.0, x)
        } else {
            0.5 * self.tail_constant + self.g_unit_pos(-x)
        }
    }
}

fn nonzero_point(z1: f64, z2: f64) -> Result<()> {
    if z1 == 0.0 && z2 == 0.0 {
        return Err(Error::Singularity("kernel evaluated at the origin".into()));
    }
    Ok(())
}

/// K(z₁, z₂) = (z₁² + z₂²)^{−(2+α)/2}.
pub fn k_eval(p: &KernelParams, z1: f64, z2: f64) -> Result<f64> {
    nonzero_point(z1, z2)?;
    Ok((z1 * z1 + z2 * z2).powf(-p.beta()))
}

/// ∂K/∂z₂ = −(2+α) z₂ (z₁² + z₂²)^{−(4+α)/2}.
pub fn k_z2(p: &KernelParams, z1: f64, z2: f64) -> Result<f64> {
    nonzero_point(z1, z2)?;
    let a = p.alpha;
    Ok(-(2.0 + a) * z2 * (z1 * z1 + z2 * z2).powf(-0.5 * (4.0 + a)))
}

/// ∂²K/∂z₂² = −(2+α)|z|^{−4−α} + (2+α)(4+α) z₂² |z|^{−6−α}.
pub fn k_z2z2(p: &KernelParams, z1: f64, z2: f64) -> Result<f64> {
    nonzero_point(z1, z2)?;
    let a = p.alpha;
    let r2 = z1 * z1 + z2 * z2;
    Ok(-(2.0 + a) * r2.powf(-0.5 * (4.0 + a)) + (2.0 + a) * (4.0 + a) * z2 * z2 * r2.powf(-0.5 * (6.0 + a)))
}

fn nonzero_t(t: f64) -> Result<()> {
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Singularity(format!("G(t, ·) needs finite t ≠ 0, got {t}")));
    }
    Ok(())
}

/// G(t, v) = ∫₀^v (t² + τ²)^{−(2+α)/2} dτ.
pub fn g_eval(p: &KernelParams, t: f64, v: f64) -> Result<f64> {
    nonzero_t(t)?;
    let at = t.abs();
    Ok(at.powf(-1.0 - p.alpha) * p.g_unit(v / at))
}

/// G(t, ∞) = |t|^{−1−α} B/2.
pub fn g_inf(p: &KernelParams, t: f64) -> Result<f64> {
    nonzero_t(t)?;
    Ok(t.abs().powf(-1.0 - p.alpha) * 0.5 * p.tail_constant)
}

/// G(t, v₂) − G(t, v₁).
pub fn g_band(p: &KernelParams, t: f64, v1: f64, v2: f64) -> Result<f64> {
    nonzero_t(t)?;
    let at = t.abs();
    Ok(at.powf(-1.0 - p.alpha) * p.g_unit_between(v1 / at, v2 / at))
}

/// G(t, ∞) − G(t, v).
pub fn g_complement(p: &KernelParams, t: f64, v: f64) -> Result<f64> {
    nonzero_t(t)?;
    let at = t.abs();
    Ok(at.powf(-1.0 - p.alpha) * p.g_unit_complement(v / at))
}

/// Branch kernels (𝒦₋, 𝒦₀) at (s, t) for the generatrix u:
/// 𝒦₋ = A |s−t|^{−2−α} with A = (1 + ((u(s)−u(t))/(s−t))²)^{−(2+α)/2},
/// 𝒦₀ = ((s−t)² + (u(s)+u(t))²)^{−(2+α)/2}.
pub fn branch_kernels(p: &KernelParams, u: &CosineSeries, s: f64, t: f64) -> Result<(f64, f64)> {
    let d = s - t;
    if d == 0.0 {
        return Err(Error::Singularity("branch kernels on the diagonal s = t".into()));
    }
    let (us, ut) = (u.eval(s), u.eval(t));
    if us <= 0.0 || ut <= 0.0 {
        return Err(Error::domain("generatrix must be positive"));
    }
    let beta = p.beta();
    let q = (us - ut) / d;
    let amp = (q * q).ln_1p() * -beta;
    let kminus = (amp - (2.0 + p.alpha) * d.abs().ln()).exp();
    let sum = us + ut;
    let kzero = (d * d + sum * sum).powf(-beta);
    Ok((kminus, kzero))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_integrate;
    use approx::assert_relative_eq;

    fn params() -> KernelParams {
        KernelParams::new(0.37).unwrap()
    }

    #[test]
    fn kernel_values() {
        let p = params();
        assert_relative_eq!(k_eval(&p, 1.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(k_eval(&p, 0.0, 1.4).unwrap(), 1.4f64.powf(-2.37), max_relative = 1e-15);
        assert_relative_eq!(k_eval(&p, 3.0, 4.0).unwrap(), 5f64.powf(-2.37), max_relative = 1e-15);
        assert!(matches!(k_eval(&p, 0.0, 0.0), Err(Error::Singularity(_))));
        assert!(k_z2(&p, 0.0, 0.0).is_err());
        assert!(k_z2z2(&p, 0.0, 0.0).is_err());
    }

    #[test]
    fn derivative_signs() {
        let p = params();
        assert_eq!(k_z2(&p, 2.0, 0.0).unwrap(), 0.0);
        for &(z1, z2) in &[(0.1, 0.2), (3.0, 0.01), (-1.0, 5.0)] {
            assert!(k_z2(&p, z1, z2).unwrap() < 0.0);
        }
    }

    #[test]
    fn g_limits() {
        let p = params();
        assert_eq!(g_eval(&p, 1.3, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            g_eval(&p, 0.7, -0.9).unwrap(),
            -g_eval(&p, 0.7, 0.9).unwrap(),
            max_relative = 1e-15
        );
        assert_relative_eq!(g_inf(&p, 1.0).unwrap(), 0.5 * p.tail_constant, max_relative = 1e-15);
        assert_relative_eq!(
            g_inf(&p, 2.0).unwrap(),
            2f64.powf(-1.37) * g_inf(&p, 1.0).unwrap(),
            max_relative = 1e-14
        );
        // G(t, ∞) − G(t, xt) = |t|^{−1−α} x^{−1−α}/(1+α) (1 + O(x^{−2}))
        for &t in &[0.2, 1.0, 7.0] {
            let gap = g_inf(&p, t).unwrap() - g_eval(&p, t, 1e3 * t).unwrap();
            let lead = t.powf(-1.37) * 1e3f64.powf(-1.37) / 1.37;
            assert_relative_eq!(gap, lead, max_relative = 1e-5);
        }
        assert!(g_eval(&p, 0.0, 1.0).is_err());
        assert!(g_inf(&p, 0.0).is_err());
    }

    #[test]
    fn centered_difference_keeps_small_widths() {
        let p = params();
        let (c, h): (f64, f64) = (-5e-3, 8e-12);
        let expected = 2.0 * h * (1.0 + c * c).powf(-p.beta());
        assert_relative_eq!(p.g_unit_centered(c, h), expected, max_relative = 1e-12);
        assert_relative_eq!(
            p.g_unit_centered(0.3, 0.2),
            p.g_unit_between(0.1, 0.5),
            max_relative = 1e-13
        );
        assert_eq!(p.g_unit_centered(2.0, 0.0), 0.0);
    }

    #[test]
    fn g_continuous_across_switch() {
        let p = params();
        let below = p.g_unit(1.0 - 1e-13);
        let above = p.g_unit(1.0 + 1e-13);
        assert!((above - below).abs() < 1e-12);
    }

    #[test]
    fn band_and_complement_consistent() {
        let p = params();
        for &(t, v1, v2) in &[
            (0.3f64, 0.1, 0.2),
            (1e-4, 1.0, 1.0001),
            (2.0, -0.5, 3.0),
            (0.01, 0.5, 40.0),
        ] {
            let direct =
                t.powf(-1.37) * adaptive_integrate(|w| (1.0 + w * w).powf(-p.beta()), v1 / t, v2 / t, 1e-13).unwrap();
            let band = g_band(&p, t, v1, v2).unwrap();
            assert_relative_eq!(band, direct, max_relative = 1e-9);
            let c = g_complement(&p, t, v1).unwrap();
            assert_relative_eq!(
                c,
                g_inf(&p, t).unwrap() - g_eval(&p, t, v1).unwrap(),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn branch_kernels_constant_generatrix() {
        let p = params();
        let r = 0.8;
        let u = CosineSeries::constant(r);
        let (km, k0) = branch_kernels(&p, &u, 0.3, -1.1).unwrap();
        assert_relative_eq!(km, 1.4f64.powf(-2.37), max_relative = 1e-14);
        assert_relative_eq!(k0, (1.4f64 * 1.4 + 4.0 * r * r).powf(-1.185), max_relative = 1e-14);
        assert!(branch_kernels(&p, &u, 0.5, 0.5).is_err());
        assert!(branch_kernels(&p, &CosineSeries::constant(-1.0), 0.5, 0.1).is_err());
    }
}
