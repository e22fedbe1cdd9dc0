//! Newton continuation of the near-cylinder branches
//! w = γR_m + a(cos(m·) + v), ⟨v, cos(m·)⟩ = 0.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::nmc::{gram_weight, Assembler, CosineSeries, NmcEvaluator};
use crate::quadrature::QuadratureSpec;
use crate::spectrum::{h_r, h_r_derivative, mu_k, r1};

const POSITIVITY_FRACTION: f64 = 0.05;
const MAX_HALVINGS: usize = 8;
const FLATNESS_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BranchPoint {
    pub m: usize,
    pub a: f64,
    pub gamma: f64,
    /// v with c_m pinned to 0.
    pub v: CosineSeries,
    /// max_j |r_j| / h_{γR_m}.
    pub residual_inf: f64,
    /// h_{γR_m}
    pub nmc_value: f64,
    pub iterations: usize,
}

impl BranchPoint {
    /// w = γR_m + a(cos(m·) + v).
    pub fn generatrix(&self, r_m: f64) -> CosineSeries {
        generatrix(self.m, r_m, self.a, self.gamma, &self.v)
    }
}

pub fn generatrix(m: usize, r_m: f64, a: f64, gamma: f64, v: &CosineSeries) -> CosineSeries {
    let mut c: Vec<f64> = v.coeffs.iter().map(|x| a * x).collect();
    c[0] += gamma * r_m;
    c[m] += a;
    CosineSeries::new(c)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BranchCurve {
    pub alpha: f64,
    pub m: usize,
    pub r_m: f64,
    pub n_modes: usize,
    /// Ordered by increasing a.
    pub points: Vec<BranchPoint>,
    pub warnings: Vec<String>,
}

impl BranchCurve {
    pub fn point_at(&self, a: f64) -> Option<&BranchPoint> {
        self.points.iter().find(|p| (p.a - a).abs() <= 1e-14 * (1.0 + a.abs()))
    }

    /// Pairs (p(a), p(−a)) for a > 0.
    pub fn symmetric_pairs(&self) -> Vec<(&BranchPoint, &BranchPoint)> {
        self.points
            .iter()
            .filter(|p| p.a > 0.0)
            .filter_map(|p| self.point_at(-p.a).map(|q| (p, q)))
            .collect()
    }
}

/// Solver state for one branch (m, α, N).
#[derive(Debug, Clone)]
pub struct BranchSolver {
    pub params: KernelParams,
    pub m: usize,
    pub r_m: f64,
    pub n_modes: usize,
    pub tol: f64,
    pub max_iter: usize,
    nmc: NmcEvaluator,
    assembler: Assembler,
}

impl BranchSolver {
    pub fn new(params: &KernelParams, m: usize, n_modes: usize) -> Result<Self> {
        let spec = NmcEvaluator::default_spec(params, n_modes);
        Self::with_spec(params, m, n_modes, &spec)
    }

    /// Solver whose residual uses the given rule.
    pub fn with_spec(params: &KernelParams, m: usize, n_modes: usize, spec: &QuadratureSpec) -> Result<Self> {
        if m == 0 || m > n_modes {
            return Err(Error::domain(format!("need 1 ≤ m ≤ N, got m = {m}, N = {n_modes}")));
        }
        let r_m = r1(params)? / m as f64;
        Ok(Self {
            params: *params,
            m,
            r_m,
            n_modes,
            tol: 1e-10,
            max_iter: 12,
            nmc: NmcEvaluator::with_spec(params, n_modes, spec)?,
            assembler: Assembler::new(params, n_modes, n_modes)?,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn check_v(&self, v: &CosineSeries) -> Result<()> {
        if v.n_modes() != self.n_modes {
            return Err(Error::domain(format!(
                "v has {} modes, solver uses {}",
                v.n_modes(),
                self.n_modes
            )));
        }
        Ok(())
    }

    fn positive(&self, w: &CosineSeries, gamma: f64) -> Result<()> {
        let min = w.grid_min(8 * (self.n_modes + 8));
        if !(gamma > 0.0 && min > POSITIVITY_FRACTION * gamma * self.r_m) {
            return Err(Error::domain(format!(
                "generatrix minimum {min:e} below {POSITIVITY_FRACTION}·γR_m"
            )));
        }
        Ok(())
    }

    /// r_j = ⟨H_α(w) − h_{γR_m}, e_j⟩ / gram_j, j = 0..=N. For a = 0 the
    /// residual of the linearized problem L(γR_m)(cos(m·) + v) is returned.
    pub fn residual(&self, a: f64, gamma: f64, v: &CosineSeries) -> Result<Vec<f64>> {
        self.check_v(v)?;
        let r = gamma * self.r_m;
        if a == 0.0 {
            let mut phi = v.coeffs.clone();
            phi[self.m] += 1.0;
            return phi
                .iter()
                .enumerate()
                .map(|(j, c)| Ok(mu_k(&self.params, r, j)? * c))
                .collect();
        }
        let w = generatrix(self.m, self.r_m, a, gamma, v);
        self.positive(&w, gamma)?;
        let mut proj = self.nmc.projections(&w, self.n_modes)?;
        proj[0] -= h_r(&self.params, r)?;
        Ok(proj)
    }

    /// Newton's method in the unknowns (γ, c_j for j ≠ m), the residual
    /// components r_0..r_N as equations.
    pub fn newton_solve(&self, a: f64, initial: (f64, &CosineSeries)) -> Result<BranchPoint> {
        let (mut gamma, v0) = initial;
        self.check_v(v0)?;
        let mut v = v0.clone();
        v.coeffs[self.m] = 0.0;
        if a == 0.0 {
            let v = CosineSeries::zeros(self.n_modes);
            let res = self.residual(0.0, 1.0, &v)?;
            let h = h_r(&self.params, self.r_m)?;
            return Ok(BranchPoint {
                m: self.m,
                a,
                gamma: 1.0,
                v,
                residual_inf: inf_norm(&res) / h,
                nmc_value: h,
                iterations: 0,
            });
        }
        let n = self.n_modes + 1;
        let mut history = Vec::new();
        let mut res = self.residual(a, gamma, &v)?;
        let mut scale = h_r(&self.params, gamma * self.r_m)?;
        let mut norm = inf_norm(&res) / scale;
        history.push(norm);
        for it in 0..=self.max_iter {
            if norm < self.tol {
                return Ok(BranchPoint {
                    m: self.m,
                    a,
                    gamma,
                    v,
                    residual_inf: norm,
                    nmc_value: scale,
                    iterations: it,
                });
            }
            if it == self.max_iter {
                break;
            }
            let w = generatrix(self.m, self.r_m, a, gamma, &v);
            let op = self.assembler.assemble(&w)?;
            let mut jac = DMatrix::<f64>::zeros(n, n);
            let dh = h_r_derivative(&self.params, gamma * self.r_m)?;
            for k in 0..n {
                let g = gram_weight(k);
                for j in 0..n {
                    jac[(k, j)] = if j == self.m {
                        2.0 * self.r_m * op.entries[(k, 0)] / g - if k == 0 { dh * self.r_m } else { 0.0 }
                    } else {
                        2.0 * a * op.entries[(k, j)] / g
                    };
                }
            }
            let rhs = -DVector::from_vec(res.clone());
            let step = jac.lu().solve(&rhs).ok_or_else(|| Error::Newton {
                a,
                message: "singular Jacobian".into(),
                residual_history: history.clone(),
            })?;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                let g_try = gamma + lambda * step[self.m];
                let mut v_try = v.clone();
                for j in 0..n {
                    if j != self.m {
                        v_try.coeffs[j] += lambda * step[j];
                    }
                }
                if let Ok(r_try) = self.residual(a, g_try, &v_try) {
                    let s_try = h_r(&self.params, g_try * self.r_m)?;
                    let n_try = inf_norm(&r_try) / s_try;
                    if n_try < norm || n_try < self.tol {
                        gamma = g_try;
                        v = v_try;
                        res = r_try;
                        scale = s_try;
                        norm = n_try;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            history.push(norm);
            if !accepted {
                return Err(Error::Newton {
                    a,
                    message: "line search failed to reduce the residual".into(),
                    residual_history: history,
                });
            }
        }
        Err(Error::Newton {
            a,
            message: format!("no convergence in {} iterations", self.max_iter),
            residual_history: history,
        })
    }

    /// max − min of H_α(w) over 64 points, relative to h_{γR_m}.
    pub fn flatness(&self, p: &BranchPoint) -> Result<f64> {
        let w = p.generatrix(self.r_m);
        Ok(self.nmc.flatness(&w, FLATNESS_POINTS)? / p.nmc_value)
    }

    /// Residual of an accepted point under a doubled-resolution rule.
    pub fn refined_residual(&self, p: &BranchPoint) -> Result<f64> {
        let spec = NmcEvaluator::default_spec(&self.params, self.n_modes).refined();
        let fine = NmcEvaluator::with_spec(&self.params, self.n_modes, &spec)?;
        let w = p.generatrix(self.r_m);
        let mut proj = fine.projections(&w, self.n_modes)?;
        proj[0] -= p.nmc_value;
        Ok(inf_norm(&proj) / p.nmc_value)
    }

    /// Natural continuation from a = 0 to ±a_max in `steps` steps per side,
    /// halving the step on Newton failure down to a_max/2¹⁰.
    pub fn continue_branch(&self, a_max: f64, steps: usize) -> Result<BranchCurve> {
        if !(a_max > 0.0 && a_max.is_finite()) || steps == 0 {
            return Err(Error::domain("continuation needs a_max > 0 and steps ≥ 1"));
        }
        let seed = self.newton_solve(0.0, (1.0, &CosineSeries::zeros(self.n_modes)))?;
        let (pos, neg) = rayon::join(
            || self.one_side(&seed, a_max, steps),
            || self.one_side(&seed, -a_max, steps),
        );
        let (mut pos_pts, pos_warn) = pos;
        let (mut neg_pts, neg_warn) = neg;
        neg_pts.reverse();
        let mut points = neg_pts;
        points.push(seed);
        points.append(&mut pos_pts);
        let mut warnings = neg_warn;
        warnings.extend(pos_warn);
        Ok(BranchCurve {
            alpha: self.params.alpha,
            m: self.m,
            r_m: self.r_m,
            n_modes: self.n_modes,
            points,
            warnings,
        })
    }

    fn one_side(&self, seed: &BranchPoint, a_end: f64, steps: usize) -> (Vec<BranchPoint>, Vec<String>) {
        let da0 = a_end / steps as f64;
        let da_min = a_end.abs() / 1024.0;
        let mut out = Vec::new();
        let mut warnings = Vec::new();
        let mut last = seed.clone();
        for j in 1..=steps {
            let target = da0 * j as f64;
            let mut da = target - last.a;
            let mut current = last.clone();
            while current.a != target {
                let a_try = if (target - current.a).abs() <= da.abs() * (1.0 + 1e-12) {
                    target
                } else {
                    current.a + da
                };
                let gamma0 = current.gamma;
                match self.newton_solve(a_try, (gamma0, &current.v)) {
                    Ok(p) => current = p,
                    Err(e) => {
                        da *= 0.5;
                        if da.abs() < da_min {
                            warnings.push(format!("continuation stopped before a = {target:e}: {e}"));
                            return (out, warnings);
                        }
                    }
                }
            }
            out.push(current.clone());
            last = current;
        }
        (out, warnings)
    }
}

fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Convenience wrapper: continuation of branch m with the default rule.
pub fn continue_branch(
    params: &KernelParams,
    m: usize,
    a_max: f64,
    steps: usize,
    n_modes: usize,
) -> Result<BranchCurve> {
    BranchSolver::new(params, m, n_modes)?.continue_branch(a_max, steps)
}

/// Symmetry diagnostics of a branch.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SymmetryReport {
    pub m: usize,
    /// m = 2^p q with q odd.
    pub p: u32,
    /// max |γ(a) − γ(−a)|.
    pub gamma_defect: f64,
    /// max over a grid of |v(a)(s + π/2^p) + v(−a)(s)|.
    pub shift_defect: f64,
    /// max over a grid of |w(a)(s + π/2^p) − w(−a)(s)|.
    pub generatrix_shift_defect: f64,
    /// max over points of the l² mass of v on indices not divisible by 2^p.
    pub off_support_mass: f64,
    /// Largest divisor d of m with all v-mass on multiples of d (below 1e-10).
    pub observed_support: usize,
    /// max |c_m| (pinned to zero).
    pub pinned_coefficient: f64,
}

pub fn symmetry_check(curve: &BranchCurve) -> SymmetryReport {
    let m = curve.m;
    let p = m.trailing_zeros();
    let period = 1usize << p;
    let shift = PI / period as f64;
    let grid: Vec<f64> = (0..128).map(|i| 2.0 * PI * i as f64 / 128.0).collect();
    let mut gamma_defect: f64 = 0.0;
    let mut shift_defect: f64 = 0.0;
    let mut w_defect: f64 = 0.0;
    for (pa, pb) in curve.symmetric_pairs() {
        gamma_defect = gamma_defect.max((pa.gamma - pb.gamma).abs());
        let wa = pa.generatrix(curve.r_m);
        let wb = pb.generatrix(curve.r_m);
        for &s in &grid {
            shift_defect = shift_defect.max((pa.v.eval(s + shift) + pb.v.eval(s)).abs());
            w_defect = w_defect.max((wa.eval(s + shift) - wb.eval(s)).abs());
        }
    }
    let mass_off = |d: usize| {
        curve
            .points
            .iter()
            .map(|pt| {
                pt.v.coeffs
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| j % d != 0)
                    .fold(0.0, |acc, (_, c)| acc + c * c)
                    .sqrt()
            })
            .fold(0.0, f64::max)
    };
    let observed_support = (1..=m)
        .rev()
        .filter(|d| m.is_multiple_of(*d))
        .find(|&d| mass_off(d) < 1e-10)
        .unwrap_or(1);
    SymmetryReport {
        m,
        p,
        gamma_defect,
        shift_defect,
        generatrix_shift_defect: w_defect,
        off_support_mass: mass_off(period),
        observed_support,
        pinned_coefficient: curve.points.iter().map(|pt| pt.v.coeffs[m].abs()).fold(0.0, f64::max),
    }
}
