//! Closed form versus quadrature battery over the special-function
//! identities, h_R and μ_k(R).

use rayon::prelude::*;

use crate::error::Result;
use crate::kernel::KernelParams;
use crate::quadrature::{PvRule, QuadratureSpec};
use crate::specfun::{f_nu, singular_cosine_integrals};
use crate::spectrum::{h_r, h_r_quadrature, mu_k, mu_k_quadrature};

pub const ORACLE_ALPHAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const ORACLE_RADII: [f64; 3] = [0.3, 1.0, 3.0];
pub const ORACLE_K_MAX: usize = 16;
pub const ORACLE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OracleCheck {
    pub quantity: String,
    pub alpha: f64,
    pub radius: Option<f64>,
    pub k: Option<usize>,
    pub closed: f64,
    pub quadrature: f64,
    /// |closed − quadrature| / scale.
    pub rel_dev: f64,
    pub pass: bool,
}

impl OracleCheck {
    #[allow(clippy::too_many_arguments)]
    fn new(
        quantity: &str,
        alpha: f64,
        radius: Option<f64>,
        k: Option<usize>,
        closed: f64,
        quadrature: f64,
        scale: f64,
        tol: f64,
    ) -> Self {
        let rel_dev = (closed - quadrature).abs() / scale.abs();
        OracleCheck {
            quantity: quantity.to_string(),
            alpha,
            radius,
            k,
            closed,
            quadrature,
            rel_dev,
            pass: rel_dev < tol,
        }
    }
}

/// ∫(3 − 4cos s + cos 2s)|s|^{−4−α}, ∫(1 − cos 2s)|s|^{−2−α}, ∫(1 − cos s)|s|^{−2−α}.
pub fn singular_integrals_quadrature(alpha: f64) -> Result<[f64; 3]> {
    let rule4 = PvRule::new(&QuadratureSpec::new(alpha, 4.0 + alpha).with_frequency(2.0))?;
    let i = rule4.integrate_pairs_checked(|t| {
        let s = (0.5 * t).sin();
        2.0 * 8.0 * s * s * s * s * t.powf(-4.0 - alpha)
    })?;
    let rule2 = PvRule::new(&QuadratureSpec::new(alpha, 2.0 + alpha).with_frequency(2.0))?;
    let j = rule2.integrate_pairs_checked(|t| {
        let s = t.sin() / t;
        2.0 * 2.0 * s * s * t.powf(-alpha)
    })?;
    let c = rule2.integrate_pairs_checked(|t| {
        let s = (0.5 * t).sin() / t;
        2.0 * 2.0 * s * s * t.powf(-alpha)
    })?;
    Ok([i, j, c])
}

/// F_ν(ξ; c) = ∫cos(ξs)(s² + c²)^{−ν/2} ds by quadrature.
pub fn f_nu_quadrature(nu: f64, xi: f64, c: f64) -> Result<f64> {
    let rule = PvRule::new(&QuadratureSpec::new(0.0, nu).with_frequency(xi.abs()))?;
    let c2 = c * c;
    rule.integrate_pairs_checked(|t| 2.0 * (xi * t).cos() * (t * t + c2).powf(-0.5 * nu))
}

/// The checks for one α.
pub fn oracle_checks_alpha(alpha: f64, radii: &[f64], k_max: usize, tol: f64) -> Result<Vec<OracleCheck>> {
    let p = KernelParams::new(alpha)?;
    let mut out = Vec::new();
    let closed = singular_cosine_integrals(alpha)?;
    let quad = singular_integrals_quadrature(alpha)?;
    for (name, c, q) in [
        ("I_4+a", closed.i, quad[0]),
        ("J_2+a", closed.j, quad[1]),
        ("C_a", closed.c, quad[2]),
    ] {
        out.push(OracleCheck::new(name, alpha, None, None, c, q, c, tol));
    }
    for &r in radii {
        let c = 2.0 * r;
        for nu in [2.0 + alpha, 4.0 + alpha, 6.0 + alpha] {
            let f0 = f_nu(nu, 0.0, c)?;
            let q0 = f_nu_quadrature(nu, 0.0, c)?;
            let name0 = format!("F_{nu:.2}(0)");
            out.push(OracleCheck::new(&name0, alpha, Some(r), Some(0), f0, q0, f0, tol));
            for k in 1..=k_max {
                let fk = f_nu(nu, k as f64, c)?;
                let qk = f_nu_quadrature(nu, k as f64, c)?;
                let name = format!("F_{nu:.2}(k)");
                // F_ν(k) decays like e^{−kc}; deviations are measured against F_ν(0)
                out.push(OracleCheck::new(
                    &name,
                    alpha,
                    Some(r),
                    Some(k),
                    fk,
                    qk,
                    fk.abs().max(f0),
                    tol,
                ));
            }
        }
        let h = h_r(&p, r)?;
        out.push(OracleCheck::new(
            "h_R",
            alpha,
            Some(r),
            None,
            h,
            h_r_quadrature(&p, r)?,
            h,
            tol,
        ));
        let scale = mu_k(&p, r, 0)?.abs();
        for k in 0..=k_max {
            let m = mu_k(&p, r, k)?;
            let q = mu_k_quadrature(&p, r, k)?;
            // μ_k crosses zero in R, so the scale includes |μ_0|
            out.push(OracleCheck::new(
                "mu_k",
                alpha,
                Some(r),
                Some(k),
                m,
                q,
                m.abs().max(scale),
                tol,
            ));
        }
    }
    Ok(out)
}

/// The full battery with the default α, R and k grids, in deterministic order.
pub fn oracle_suite() -> Result<Vec<OracleCheck>> {
    oracle_suite_with(&ORACLE_ALPHAS, &ORACLE_RADII, ORACLE_K_MAX, ORACLE_TOL)
}

pub fn oracle_suite_with(alphas: &[f64], radii: &[f64], k_max: usize, tol: f64) -> Result<Vec<OracleCheck>> {
    let per = alphas
        .par_iter()
        .map(|&a| oracle_checks_alpha(a, radii, k_max, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(per.into_iter().flatten().collect())
}
