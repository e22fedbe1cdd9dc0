//! Eigen-continuation along branches, the compression Rayleigh quotient and
//! the stability coefficient σ(α) of the first branch.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::branch::{BranchCurve, BranchPoint};
use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::nmc::{assemble_operator, CosineSeries, OperatorMatrix};
use crate::quadrature::{PvRule, QuadratureSpec};
use crate::specfun::{gamma, gamma_half_one_minus_alpha, psi};
use crate::spectrum::{mu_k, mu_k_quadrature, r1};

const MIN_OVERLAP: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrackedEigenpair {
    /// Label: the eigenvector tends to cos(k·) as a → 0.
    pub k: usize,
    pub mu: f64,
    /// Normalized to ⟨e_k(a), e_k(a)⟩ = ⟨e_k, e_k⟩, with positive k-th coefficient.
    pub vec: CosineSeries,
    pub overlap: f64,
}

/// Generalized eigenpairs of M x = μ G x, eigenvalues ascending, columns
/// normalized to xᵀGx = 1.
pub fn generalized_eigen(op: &OperatorMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let n = op.gram.len();
    let inv_sqrt: Vec<f64> = op.gram.iter().map(|g| 1.0 / g.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * op.entries[(i, j)] * inv_sqrt[j]);
    let eig = SymmetricEigen::new(scaled);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| inv_sqrt[r] * eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Labels eigenpairs of `op` by maximal overlap with cos(k·) (no
/// `reference`) or with previously tracked pairs.
pub fn track_operator(
    op: &OperatorMatrix,
    k_track: &[usize],
    reference: Option<&[TrackedEigenpair]>,
) -> Result<Vec<TrackedEigenpair>> {
    let (values, vectors) = generalized_eigen(op);
    let n = op.gram.len();
    let mut out = Vec::with_capacity(k_track.len());
    for (idx, &k) in k_track.iter().enumerate() {
        if k >= n {
            return Err(Error::domain(format!("cannot track mode {k} with {n} basis functions")));
        }
        // overlap of column c with the target, in the G-inner product
        let target: Vec<f64> = match reference {
            Some(r) => r[idx].vec.resized(n - 1).coeffs,
            None => {
                let mut e = vec![0.0; n];
                e[k] = 1.0;
                e
            }
        };
        let tnorm: f64 = (0..n).map(|i| op.gram[i] * target[i] * target[i]).sum::<f64>().sqrt();
        let (best, overlap) = (0..n)
            .map(|c| {
                let ip: f64 = (0..n).map(|i| op.gram[i] * target[i] * vectors[(i, c)]).sum();
                (c, ip.abs() / tnorm)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty basis");
        if overlap <= MIN_OVERLAP {
            return Err(Error::Tracking { k, overlap });
        }
        let norm = op.gram[k].sqrt();
        let sign = if vectors[(k, best)] < 0.0 { -1.0 } else { 1.0 };
        let coeffs = (0..n).map(|i| sign * norm * vectors[(i, best)]).collect();
        out.push(TrackedEigenpair {
            k,
            mu: values[best],
            vec: CosineSeries::new(coeffs),
            overlap,
        });
    }
    Ok(out)
}

/// Eigenpairs of L(w) at a branch point, labelled by their a = 0 limits.
pub fn track_spectrum(
    params: &KernelParams,
    point: &BranchPoint,
    r_m: f64,
    k_track: &[usize],
) -> Result<Vec<TrackedEigenpair>> {
    let w = point.generatrix(r_m);
    let op = assemble_operator(params, &w, point.v.n_modes())?;
    track_operator(&op, k_track, None)
}

/// 𝓡(a) = μ₀γQ²/(1+γQ²) + μ₁/(1+γQ²), γ = 2, Q = c₀(e₁(a)) / c₀(e₀(a)).
pub fn rayleigh_compression(e0: &TrackedEigenpair, e1: &TrackedEigenpair) -> Result<f64> {
    let d = e0.vec.coeffs[0];
    if d.abs() < 1e-6 {
        return Err(Error::Accuracy(format!("degenerate denominator in Q: c₀(e₀) = {d:e}")));
    }
    let q = e1.vec.coeffs[0] / d;
    let gq2 = 2.0 * q * q;
    Ok((e0.mu * gq2 + e1.mu) / (1.0 + gq2))
}

/// min ⟨v, Lv⟩/⟨v, v⟩ over zero-mean v in the Galerkin space: the smallest
/// eigenvalue of the operator with the constant mode removed.
pub fn rayleigh_restricted(op: &OperatorMatrix) -> f64 {
    let n = op.gram.len();
    let sub = OperatorMatrix {
        entries: op.entries.view((1, 1), (n - 1, n - 1)).into_owned(),
        gram: op.gram[1..].to_vec(),
        asymmetry_defect: op.asymmetry_defect,
    };
    generalized_eigen(&sub).0[0]
}

/// The three displayed terms of σ evaluated by quadrature, c = 2R₁.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SigmaTerms {
    pub local: f64,
    pub band: f64,
    pub coupling: f64,
    pub mu2: f64,
}

impl SigmaTerms {
    pub fn total(&self) -> f64 {
        self.local + self.band + self.coupling
    }
}

pub fn sigma_integral_terms(params: &KernelParams, r1: f64) -> Result<SigmaTerms> {
    let a = params.alpha;
    let c = 2.0 * r1;
    let c2 = c * c;
    // ¼∫(3 − 4cos t + cos 2t) K_{z₂z₂}(t, 0) = −(2+α)/4 ∫ 8 sin⁴(t/2) |t|^{−4−α}
    let rule = PvRule::new(&QuadratureSpec::new(a, 4.0 + a).with_frequency(2.0))?;
    let local = 0.25
        * rule.integrate_pairs_checked(|t| {
            let s = (0.5 * t).sin() / t;
            -2.0 * (2.0 + a) * 8.0 * s * s * s * s * t.powf(-a)
        })?;
    let smooth = PvRule::new(&QuadratureSpec::new(0.0, 4.0 + a).with_frequency(2.0))?;
    let kzz = |t: f64| {
        let r2 = t * t + c2;
        -(2.0 + a) * r2.powf(-0.5 * (4.0 + a)) + (2.0 + a) * (4.0 + a) * c2 * r2.powf(-0.5 * (6.0 + a))
    };
    let band = -0.25 * smooth.integrate_pairs_checked(|t| 2.0 * (3.0 + 4.0 * t.cos() + (2.0 * t).cos()) * kzz(t))?;
    let kz = |t: f64| -(2.0 + a) * c * (t * t + c2).powf(-0.5 * (4.0 + a));
    let num = smooth.integrate_pairs_checked(|t| 2.0 * (1.0 + 2.0 * t.cos() + (2.0 * t).cos()) * kz(t))?;
    let mu2 = mu_k_quadrature(params, r1, 2)?;
    Ok(SigmaTerms {
        local,
        band,
        coupling: -0.25 * num * num / mu2,
        mu2,
    })
}

/// σ by quadrature of the three displayed integrals.
pub fn sigma_integral_route(params: &KernelParams, r1: f64) -> Result<f64> {
    Ok(sigma_integral_terms(params, r1)?.total())
}

/// The denominator group 2c^{1+α}Γ((1−α)/2)/(1+α) − Γ((1+α)/2) − Ψ_{(1+α)/2}(2c).
pub fn sigma_denominator(params: &KernelParams, c: f64) -> Result<f64> {
    let a = params.alpha;
    Ok(2.0 * c.powf(1.0 + a) * gamma_half_one_minus_alpha(a)? / (1.0 + a)
        - gamma(0.5 * (1.0 + a))?
        - psi(0.5 * (1.0 + a), 2.0 * c)?)
}

/// σ from the Γ/Ψ closed form, c = 2R₁.
pub fn sigma_specfun_route(params: &KernelParams, r1: f64) -> Result<f64> {
    let a = params.alpha;
    let c = 2.0 * r1;
    let n3 = 0.5 * (3.0 + a);
    let n5 = 0.5 * (5.0 + a);
    let g1 = gamma_half_one_minus_alpha(a)?;
    let first = -(4.0 - 2f64.powf(1.0 - a)) * c.powf(3.0 + a) * g1 / ((3.0 + a) * (1.0 + a));
    let second = 3.0 * gamma(n3)? + 4.0 * psi(n3, c)? + psi(n3, 2.0 * c)?;
    let third = -2.0 * (3.0 * gamma(n5)? + 4.0 * psi(n5, c)? + psi(n5, 2.0 * c)?);
    let y = gamma(n3)? + 2.0 * psi(n3, c)? + psi(n3, 2.0 * c)?;
    let fourth = -2.0 * y * y / sigma_denominator(params, c)?;
    let rhs = first + second + third + fourth;
    Ok(rhs * (PI.sqrt() / 2.0) / (gamma(0.5 * (2.0 + a))? * c.powf(3.0 + a)))
}

/// Rayleigh quotient 𝓡₁(a) along a branch point.
pub fn rayleigh_at(params: &KernelParams, curve: &BranchCurve, point: &BranchPoint) -> Result<f64> {
    let tracked = track_spectrum(params, point, curve.r_m, &[0, 1])?;
    rayleigh_compression(&tracked[0], &tracked[1])
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SigmaFit {
    /// Fitted a²-coefficient.
    pub sigma: f64,
    /// Fitted a⁴-coefficient.
    pub quartic: f64,
    /// Even-part samples (a, 𝓡).
    pub samples: Vec<(f64, f64)>,
    /// Largest fit residual relative to the leading term.
    pub relative_residual: f64,
}

/// Least-squares fit 𝓡_even(a) = σa² + da⁴ over matched ±a pairs of an
/// m = 1 branch with 0 < a ≤ a_fit.
pub fn sigma_fit_route(params: &KernelParams, curve: &BranchCurve, a_fit: f64) -> Result<SigmaFit> {
    if curve.m != 1 {
        return Err(Error::domain("the σ fit uses the first branch"));
    }
    let pairs: Vec<_> = curve
        .symmetric_pairs()
        .into_iter()
        .filter(|(p, _)| p.a <= a_fit * (1.0 + 1e-12))
        .collect();
    if pairs.len() < 2 {
        return Err(Error::Fit(format!("need ≥ 2 matched ±a pairs, have {}", pairs.len())));
    }
    let samples: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|(p, q)| {
            let rp = rayleigh_at(params, curve, p)?;
            let rq = rayleigh_at(params, curve, q)?;
            Ok((p.a, 0.5 * (rp + rq)))
        })
        .collect::<Result<Vec<_>>>()?;
    // normal equations in the basis (a², a⁴) scaled by a_fit
    let s = a_fit;
    let (mut m11, mut m12, mut m22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(a, r) in &samples {
        let x = (a / s).powi(2);
        m11 += x * x;
        m12 += x * x * x;
        m22 += x * x * x * x;
        b1 += x * r;
        b2 += x * x * r;
    }
    let det = m11 * m22 - m12 * m12;
    let (c2, c4) = if samples.len() >= 3 && det.abs() > 1e-12 * m11 * m22 {
        ((m22 * b1 - m12 * b2) / det, (m11 * b2 - m12 * b1) / det)
    } else {
        (b1 / m11, 0.0)
    };
    let sigma = c2 / (s * s);
    let quartic = c4 / s.powi(4);
    let relative_residual = samples
        .iter()
        .map(|&(a, r)| {
            let lead = sigma * a * a;
            ((r - lead - quartic * a.powi(4)) / lead).abs()
        })
        .fold(0.0, f64::max);
    if relative_residual > 0.2 {
        return Err(Error::Fit(format!(
            "fit residual {relative_residual:.3} of the leading term"
        )));
    }
    Ok(SigmaFit {
        sigma,
        quartic,
        samples,
        relative_residual,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StabilityReport {
    pub alpha: f64,
    pub r1: f64,
    pub sigma_integral: f64,
    pub sigma_specfun: f64,
    pub sigma_fit: Option<f64>,
    /// −1 unstable, 0 degenerate, +1 stable.
    pub verdict: i8,
    pub status: String,
}

impl StabilityReport {
    /// (2R₁)^{1+α} Γ((1−α)/2)
    pub fn scaled_radius(&self) -> f64 {
        (2.0 * self.r1).powf(1.0 + self.alpha) * gamma_half_one_minus_alpha(self.alpha).unwrap_or(f64::NAN)
    }

    pub fn sigma_scaled(&self) -> f64 {
        (1.0 - self.alpha).powi(2) * self.sigma_specfun
    }
}

pub fn stability_report(alpha: f64) -> Result<StabilityReport> {
    let params = KernelParams::new(alpha)?;
    let r1 = r1(&params)?;
    let sigma_specfun = sigma_specfun_route(&params, r1)?;
    let sigma_integral = sigma_integral_route(&params, r1)?;
    let rel = (sigma_integral - sigma_specfun).abs() / sigma_specfun.abs();
    let status = if sigma_integral.signum() != sigma_specfun.signum() {
        "routes disagree in sign".to_string()
    } else if rel > 1e-6 {
        format!("routes differ by {rel:.2e}")
    } else {
        "ok".to_string()
    };
    Ok(StabilityReport {
        alpha,
        r1,
        sigma_integral,
        sigma_specfun,
        sigma_fit: None,
        verdict: if sigma_specfun < 0.0 {
            -1
        } else if sigma_specfun > 0.0 {
            1
        } else {
            0
        },
        status,
    })
}

/// One report per α; failures are recorded in the status field.
pub fn stability_sweep(alpha_grid: &[f64]) -> Vec<StabilityReport> {
    alpha_grid
        .par_iter()
        .map(|&alpha| {
            stability_report(alpha).unwrap_or_else(|e| StabilityReport {
                alpha,
                r1: f64::NAN,
                sigma_integral: f64::NAN,
                sigma_specfun: f64::NAN,
                sigma_fit: None,
                verdict: 0,
                status: format!("error: {e}"),
            })
        })
        .collect()
}

/// n Chebyshev points of the first kind mapped into (lo, hi), ascending.
pub fn chebyshev_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .rev()
        .map(|i| {
            let x = (PI * (2 * i + 1) as f64 / (2 * n) as f64).cos();
            0.5 * (lo + hi) + 0.5 * (hi - lo) * x
        })
        .collect()
}

/// Closed-form eigenvalue μ_k(R) at the straight band, for the a = 0 check.
pub fn straight_eigenvalues(params: &KernelParams, r: f64, k_track: &[usize]) -> Result<Vec<f64>> {
    k_track.iter().map(|&k| mu_k(params, r, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_grid_is_interior_and_sorted() {
        let g = chebyshev_grid(0.02, 0.98, 48);
        assert_eq!(g.len(), 48);
        assert!(g[0] > 0.02 && g[47] < 0.98);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn compression_at_zero_amplitude() {
        let e0 = TrackedEigenpair {
            k: 0,
            mu: -3.0,
            vec: CosineSeries::new(vec![1.0, 0.0]),
            overlap: 1.0,
        };
        let e1 = TrackedEigenpair {
            k: 1,
            mu: 0.25,
            vec: CosineSeries::new(vec![0.0, 1.0]),
            overlap: 1.0,
        };
        assert_eq!(rayleigh_compression(&e0, &e1).unwrap(), 0.25);
        let bad = TrackedEigenpair {
            vec: CosineSeries::new(vec![0.0, 1.0]),
            ..e0
        };
        assert!(rayleigh_compression(&bad, &e1).is_err());
    }
}
