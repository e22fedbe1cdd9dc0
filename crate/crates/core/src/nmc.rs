//! The nonlocal mean curvature H_α(u) of the band {|z₂| < u(z₁)} for even
//! 2π-periodic generatrices u given as cosine series, and the Galerkin matrix
//! of L(u) = ½ D_u H_α(u) in the basis cos(k·).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use ndarray::{linalg::general_mat_mul, Array2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::quadrature::{PvRule, QuadratureSpec};
use crate::specfun::f_nu;
use crate::spectrum::h_r;

const ASSEMBLY_CHUNK: usize = 4;

/// u(s) = Σ_{j=0}^{N} c_j cos(js).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CosineSeries {
    pub coeffs: Vec<f64>,
}

impl CosineSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a cosine series needs at least c_0");
        Self { coeffs }
    }

    pub fn constant(r: f64) -> Self {
        Self { coeffs: vec![r] }
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self {
            coeffs: vec![0.0; n_modes + 1],
        }
    }

    /// Highest mode index N.
    pub fn n_modes(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Clenshaw summation.
    pub fn eval(&self, s: f64) -> f64 {
        let x = s.cos();
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + x * b1 - b2
    }

    /// Copy padded or truncated to N modes.
    pub fn resized(&self, n_modes: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(n_modes + 1, 0.0);
        Self { coeffs: c }
    }

    /// Minimum over an equispaced grid of `n` points on [0, π].
    pub fn grid_min(&self, n: usize) -> f64 {
        (0..=n)
            .map(|i| self.eval(PI * i as f64 / n as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Spectral evaluation of `u` at s.
pub fn eval_series(u: &CosineSeries, s: f64) -> f64 {
    u.eval(s)
}

/// ⟨e_k, e_k⟩ on [−π, π]: 2π for k = 0, π otherwise.
pub fn gram_weight(k: usize) -> f64 {
    if k == 0 {
        2.0 * PI
    } else {
        PI
    }
}

/// Galerkin matrix M_{jk} = ⟨e_j, L(u) e_k⟩ with e_k = cos(k·).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    pub entries: DMatrix<f64>,
    pub gram: Vec<f64>,
    /// max |M − Mᵀ| before symmetrization.
    pub asymmetry_defect: f64,
}

impl OperatorMatrix {
    pub fn n_modes(&self) -> usize {
        self.gram.len() - 1
    }

    /// M_{jj} / gram_j.
    pub fn rayleigh_diagonal(&self) -> Vec<f64> {
        (0..self.gram.len())
            .map(|j| self.entries[(j, j)] / self.gram[j])
            .collect()
    }

    /// Largest off-diagonal magnitude.
    pub fn max_off_diagonal(&self) -> f64 {
        let n = self.gram.len();
        let mut m: f64 = 0.0;
        for j in 0..n {
            for k in 0..n {
                if j != k {
                    m = m.max(self.entries[(j, k)].abs());
                }
            }
        }
        m
    }
}

/// sin(jt) and 1 − cos(jt) = 2 sin²(jt/2) at each rule node, j = 0..=n.
#[derive(Debug, Clone)]
struct TrigTable {
    width: usize,
    sin: Vec<f64>,
    vers: Vec<f64>,
}

impl TrigTable {
    fn new(nodes: &[f64], n: usize) -> Self {
        let width = n + 1;
        let mut sin = Vec::with_capacity(nodes.len() * width);
        let mut vers = Vec::with_capacity(nodes.len() * width);
        for &t in nodes {
            for j in 0..width {
                let jt = j as f64 * t;
                sin.push(jt.sin());
                let h = (0.5 * jt).sin();
                vers.push(2.0 * h * h);
            }
        }
        Self { width, sin, vers }
    }

    #[inline]
    fn row(&self, i: usize) -> (&[f64], &[f64]) {
        let a = i * self.width;
        (&self.sin[a..a + self.width], &self.vers[a..a + self.width])
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The generatrix written around a fixed s: u(s ∓ t) = U − B ± A with
/// A = Σ c_j sin(js) sin(jt) and B = Σ c_j cos(js)(1 − cos(jt)).
struct Centered {
    value: f64,
    cs: Vec<f64>,
    sn: Vec<f64>,
}

impl Centered {
    fn new(u: &CosineSeries, s: f64, width: usize) -> Self {
        let mut cs = vec![0.0; width];
        let mut sn = vec![0.0; width];
        for (j, c) in u.coeffs.iter().enumerate().take(width) {
            let (sj, cj) = (j as f64 * s).sin_cos();
            cs[j] = c * cj;
            sn[j] = c * sj;
        }
        Self {
            value: u.eval(s),
            cs,
            sn,
        }
    }
}

fn check_positive(u: &CosineSeries) -> Result<()> {
    let m = u.grid_min(8 * (u.n_modes() + 8));
    if m.is_nan() || m <= 0.0 {
        return Err(Error::domain(format!(
            "generatrix must be positive (grid minimum {m:e})"
        )));
    }
    Ok(())
}

/// Evaluates H_α(u)(s) for generatrices with up to `n_modes` modes.
///
/// Uses ½H(u)(s) = h_{u(s)}/2 + ∫_ℝ {G(t, u(s)−u(s−t)) + G(t, 2u(s)) − G(t, u(s)+u(s−t))} dt,
/// where the PV integral is paired over ±t.
#[derive(Debug, Clone)]
pub struct NmcEvaluator {
    params: KernelParams,
    rule: PvRule,
    table: TrigTable,
    n_modes: usize,
}

impl NmcEvaluator {
    pub fn new(params: &KernelParams, n_modes: usize) -> Result<Self> {
        Self::with_spec(params, n_modes, &Self::default_spec(params, n_modes))
    }

    pub fn default_spec(params: &KernelParams, n_modes: usize) -> QuadratureSpec {
        QuadratureSpec::new(params.alpha, 2.0 + params.alpha).with_frequency((2 * n_modes.max(4)) as f64)
    }

    pub fn with_spec(params: &KernelParams, n_modes: usize, spec: &QuadratureSpec) -> Result<Self> {
        let rule = PvRule::new(spec)?;
        let table = TrigTable::new(rule.nodes(), n_modes);
        Ok(Self {
            params: *params,
            rule,
            table,
            n_modes,
        })
    }

    fn eval_unchecked(&self, u: &CosineSeries, s: f64) -> Result<f64> {
        let p = &self.params;
        let cu = Centered::new(u, s, self.n_modes + 1);
        let big_u = cu.value;
        let mut acc = 0.0;
        for (i, (&t, &w)) in self.rule.nodes().iter().zip(self.rule.weights()).enumerate() {
            let (sin, vers) = self.table.row(i);
            let a1 = dot(&cu.sn, sin);
            let b1 = dot(&cu.cs, vers);
            let (a, b) = (-a1 / t, b1 / t);
            let u_minus = big_u - b1 + a1;
            let u_plus = big_u - b1 - a1;
            let top = 2.0 * big_u / t;
            let inner = p.g_unit_centered(a, b)
                + p.g_unit_between((big_u + u_minus) / t, top)
                + p.g_unit_between((big_u + u_plus) / t, top);
            acc += w * t.powf(-1.0 - p.alpha) * inner;
        }
        Ok(h_r(p, big_u)? + 2.0 * acc)
    }

    /// H_α(u)(s).
    pub fn eval(&self, u: &CosineSeries, s: f64) -> Result<f64> {
        self.check_series(u)?;
        self.eval_unchecked(u, s)
    }

    fn check_series(&self, u: &CosineSeries) -> Result<()> {
        if u.n_modes() > self.n_modes {
            return Err(Error::domain(format!(
                "series has {} modes, evaluator built for {}",
                u.n_modes(),
                self.n_modes
            )));
        }
        check_positive(u)
    }

    /// H_α(u) at each point of `s`, in parallel.
    pub fn profile(&self, u: &CosineSeries, s: &[f64]) -> Result<Vec<f64>> {
        self.check_series(u)?;
        s.par_iter().map(|&x| self.eval_unchecked(u, x)).collect()
    }

    /// Cosine coefficients (⟨H(u), e_j⟩ / gram_j)_{j=0..=n} by the periodic
    /// trapezoid rule on 4(n+1) points, using evenness in s.
    pub fn projections(&self, u: &CosineSeries, n: usize) -> Result<Vec<f64>> {
        let grid = HalfGrid::new(4 * (n + 1));
        let vals = self.profile(u, &grid.s)?;
        Ok(grid.project(&vals, n))
    }

    /// Oscillation max − min of H(u) over `n` equispaced points of [0, 2π).
    pub fn flatness(&self, u: &CosineSeries, n: usize) -> Result<f64> {
        let s: Vec<f64> = (0..=n / 2).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
        let vals = self.profile(u, &s)?;
        let (lo, hi) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
        Ok(hi - lo)
    }
}

/// H_α(u)(s) with the default rule.
pub fn nmc_eval(params: &KernelParams, u: &CosineSeries, s: f64) -> Result<f64> {
    NmcEvaluator::new(params, u.n_modes())?.eval(u, s)
}

/// The points s_i = 2πi/M, i = 0..=M/2, with trapezoid weights for an even
/// periodic integrand over [−π, π].
#[derive(Debug, Clone)]
pub struct HalfGrid {
    pub s: Vec<f64>,
    pub w: Vec<f64>,
}

impl HalfGrid {
    pub fn new(m: usize) -> Self {
        assert!(
            m >= 2 && m.is_multiple_of(2),
            "trapezoid grid needs an even point count"
        );
        let h = 2.0 * PI / m as f64;
        let half = m / 2;
        let s = (0..=half).map(|i| i as f64 * h).collect();
        let w = (0..=half)
            .map(|i| if i == 0 || i == half { h } else { 2.0 * h })
            .collect();
        Self { s, w }
    }

    /// (∫ f cos(j·) ds / gram_j)_{j=0..=n}.
    pub fn project(&self, vals: &[f64], n: usize) -> Vec<f64> {
        (0..=n)
            .map(|j| {
                let sum: f64 = self
                    .s
                    .iter()
                    .zip(&self.w)
                    .zip(vals)
                    .map(|((s, w), v)| w * v * (j as f64 * s).cos())
                    .sum();
                sum / gram_weight(j)
            })
            .collect()
    }
}

/// Assembles the Galerkin matrix of L(u) for a fixed basis size.
///
/// M_{jk} = ½∬ D_j D_k 𝒦₋ − ½∬ S_j S_k 𝒦₀ with D_j = cos(js) − cos(j(s−τ)),
/// S_j = cos(js) + cos(j(s−τ)); accumulated as X̃ᵀ S X̃ over the s-grid with S = diag(±1).
#[derive(Debug, Clone)]
pub struct Assembler {
    params: KernelParams,
    rule: PvRule,
    table: TrigTable,
    n_basis: usize,
    n_series: usize,
}

impl Assembler {
    pub fn new(params: &KernelParams, n_basis: usize, n_series: usize) -> Result<Self> {
        let spec = Self::default_spec(params, n_basis, n_series);
        Self::with_spec(params, n_basis, n_series, &spec)
    }

    pub fn default_spec(params: &KernelParams, n_basis: usize, n_series: usize) -> QuadratureSpec {
        QuadratureSpec::new(params.alpha, 2.0 + params.alpha).with_frequency((2 * n_basis + n_series).max(8) as f64)
    }

    pub fn with_spec(params: &KernelParams, n_basis: usize, n_series: usize, spec: &QuadratureSpec) -> Result<Self> {
        let rule = PvRule::new(spec)?;
        let table = TrigTable::new(rule.nodes(), n_basis.max(n_series));
        Ok(Self {
            params: *params,
            rule,
            table,
            n_basis,
            n_series,
        })
    }

    fn slice(&self, u: &CosineSeries, s: f64, ws: f64) -> (Array2<f64>, Vec<f64>) {
        let p = &self.params;
        let a = p.alpha;
        let beta = p.beta();
        let nb = self.n_basis + 1;
        let n_nodes = self.rule.len();
        let cu = Centered::new(u, s, self.table.width);
        let big_u = cu.value;
        let cos_js: Vec<f64> = (0..nb).map(|j| (j as f64 * s).cos()).collect();
        let sin_js: Vec<f64> = (0..nb).map(|j| (j as f64 * s).sin()).collect();

        // rows 0..2n: 𝒦₋ part at ±τ, rows 2n..4n: 𝒦₀ part at ±τ; the tail
        // weights may be negative, so row signs are kept separately
        let mut x = Array2::<f64>::zeros((4 * n_nodes, nb));
        let mut sign = vec![0.0; 4 * n_nodes];
        for (i, (&t, &w)) in self.rule.nodes().iter().zip(self.rule.weights()).enumerate() {
            let (sin, vers) = self.table.row(i);
            let a1 = dot(&cu.sn, sin);
            let b1 = dot(&cu.cs, vers);
            let (qa, qb) = (-a1 / t, b1 / t);
            let u_minus = big_u - b1 + a1;
            let u_plus = big_u - b1 - a1;
            let tpow = t.powf(-a);
            let half_w = 0.5 * ws * w.abs();
            let sw = w.signum();
            sign[i] = sw;
            sign[n_nodes + i] = sw;
            sign[2 * n_nodes + i] = -sw;
            sign[3 * n_nodes + i] = -sw;
            let amp_p = (half_w * tpow * (-beta * ((qa + qb) * (qa + qb)).ln_1p()).exp()).sqrt();
            let amp_m = (half_w * tpow * (-beta * ((qa - qb) * (qa - qb)).ln_1p()).exp()).sqrt();
            let sp = big_u + u_minus;
            let sm = big_u + u_plus;
            let k0p = (half_w * (t * t + sp * sp).powf(-beta)).sqrt();
            let k0m = (half_w * (t * t + sm * sm).powf(-beta)).sqrt();
            for j in 0..nb {
                let ss = sin_js[j] * sin[j];
                let cv = cos_js[j] * vers[j];
                // D_j(s, ±τ)/τ and S_j(s, ±τ)
                x[[i, j]] = amp_p * (ss - cv) / t;
                x[[n_nodes + i, j]] = amp_m * (-ss - cv) / t;
                let sym = cos_js[j] * (2.0 - vers[j]);
                x[[2 * n_nodes + i, j]] = k0p * (sym + ss);
                x[[3 * n_nodes + i, j]] = k0m * (sym - ss);
            }
        }
        (x, sign)
    }

    pub fn assemble(&self, u: &CosineSeries) -> Result<OperatorMatrix> {
        if u.n_modes() > self.n_series {
            return Err(Error::domain(format!(
                "series has {} modes, assembler built for {}",
                u.n_modes(),
                self.n_series
            )));
        }
        check_positive(u)?;
        let nb = self.n_basis + 1;
        let grid = HalfGrid::new(4 * (self.n_basis.max(self.n_series) + 1));
        let nodes: Vec<(f64, f64)> = grid.s.iter().copied().zip(grid.w.iter().copied()).collect();
        // fixed chunks summed in order keep the result independent of scheduling
        let partial: Vec<Array2<f64>> = nodes
            .par_chunks(ASSEMBLY_CHUNK)
            .map(|chunk| {
                let mut acc = Array2::<f64>::zeros((nb, nb));
                for &(s, ws) in chunk {
                    let (x, sign) = self.slice(u, s, ws);
                    let mut xs = x.clone();
                    for (mut row, sg) in xs.rows_mut().into_iter().zip(&sign) {
                        row *= *sg;
                    }
                    general_mat_mul(1.0, &x.t(), &xs, 1.0, &mut acc);
                }
                acc
            })
            .collect();
        let total = partial.into_iter().fold(Array2::<f64>::zeros((nb, nb)), |a, b| a + b);

        let mut entries = DMatrix::from_fn(nb, nb, |j, k| total[[j, k]]);
        let mut defect: f64 = 0.0;
        for j in 0..nb {
            for k in 0..j {
                defect = defect.max((entries[(j, k)] - entries[(k, j)]).abs());
            }
        }
        let sym = 0.5 * (&entries + entries.transpose());
        entries = sym;
        if defect > 1e-6 {
            return Err(Error::Accuracy(format!("assembled operator asymmetry {defect:e}")));
        }
        Ok(OperatorMatrix {
            entries,
            gram: (0..nb).map(gram_weight).collect(),
            asymmetry_defect: defect,
        })
    }
}

/// Galerkin matrix of L(u) on cos(0·), …, cos(N·) with the default rule.
pub fn assemble_operator(params: &KernelParams, u: &CosineSeries, n_modes: usize) -> Result<OperatorMatrix> {
    Assembler::new(params, n_modes, u.n_modes())?.assemble(u)
}

/// κ_m = −∫(1 + cos mt) 2R K_{z₂}(t, 2R) dt = (2+α)(2R)² ∫(1 + cos mt)(t² + 4R²)^{−(4+α)/2} dt.
pub fn kappa_m(params: &KernelParams, r: f64, m: usize) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) || m == 0 {
        return Err(Error::domain(format!("κ_m needs R > 0 and m ≥ 1 (R = {r}, m = {m})")));
    }
    let a = params.alpha;
    let c = 2.0 * r;
    let mf = m as f64;
    let spec = QuadratureSpec::new(0.0, 4.0 + a).with_frequency(mf);
    let v = PvRule::new(&spec)?
        .integrate_pairs_checked(|t| 2.0 * (1.0 + (mf * t).cos()) * (t * t + c * c).powf(-0.5 * (4.0 + a)))?;
    Ok((2.0 + a) * c * c * v)
}

/// κ_m = (2+α)c²[F_{4+α}(0; c) + F_{4+α}(m; c)], c = 2R.
pub fn kappa_m_closed(params: &KernelParams, r: f64, m: usize) -> Result<f64> {
    let a = params.alpha;
    let c = 2.0 * r;
    Ok((2.0 + a) * c * c * (f_nu(4.0 + a, 0.0, c)? + f_nu(4.0 + a, m as f64, c)?))
}
