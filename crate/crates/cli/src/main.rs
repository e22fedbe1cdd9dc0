//! `nld`: spectra, bifurcation radii, branches and stability coefficients of
//! nonlocal Delaunay sets, as CSV or JSON.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nld::branch::{symmetry_check, BranchCurve, BranchSolver, SymmetryReport};
use nld::oracle::{oracle_suite_with, ORACLE_ALPHAS, ORACLE_K_MAX, ORACLE_RADII, ORACLE_TOL};
use nld::spectrum::{bifurcation_radii, mu_k, mu_k_quadrature, r1};
use nld::stability::{chebyshev_grid, rayleigh_at, sigma_fit_route, sigma_specfun_route, stability_sweep};
use nld::{Error, KernelParams};
use serde::Serialize;

use output::{Cell, Table};

const MAX_K: usize = 4096;
const MAX_MODES: usize = 256;
const MAX_STEPS: usize = 1000;
const MAX_POINTS: usize = 10_000;

#[derive(Parser, Debug)]
#[command(
    name = "nld",
    version,
    about = "Nonlocal mean curvature of periodic bands and their bifurcating branches"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// μ_k(R) by closed form and by quadrature, k = 0..=k_max.
    Spectrum {
        #[arg(long)]
        alpha: f64,
        /// Band radius; R₁ when omitted.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long, default_value_t = 16)]
        k_max: usize,
    },
    /// R_m = R₁/m and the check μ_m(R_m), m = 1..=M.
    Radii {
        #[arg(long)]
        alpha: f64,
        /// Largest m.
        #[arg(long, default_value_t = 10)]
        m: usize,
    },
    /// Continuation of the m-th branch to |a| = a_max·R_m.
    Branch(BranchArgs),
    /// σ(α) by both analytic routes over Chebyshev points of (alpha_min, alpha_max).
    StabilitySweep {
        #[arg(long, default_value_t = 0.02)]
        alpha_min: f64,
        #[arg(long, default_value_t = 0.98)]
        alpha_max: f64,
        #[arg(long, default_value_t = 48)]
        points: usize,
    },
    /// Rayleigh quotient 𝓡 along the m-th branch; for m = 1 also the fitted a²-coefficient.
    Rayleigh(BranchArgs),
    /// Closed form versus quadrature battery.
    OracleSuite {
        /// Relative tolerance of each check.
        #[arg(long, default_value_t = ORACLE_TOL)]
        tol: f64,
        /// Restrict to one α; the default grid otherwise.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = ORACLE_K_MAX)]
        k_max: usize,
    },
}

#[derive(Args, Debug, Clone)]
struct BranchArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Largest amplitude as a fraction of R_m.
    #[arg(long, default_value_t = 0.05)]
    a_max: f64,
    /// Continuation steps on each side of a = 0.
    #[arg(long, default_value_t = 4)]
    steps: usize,
    /// Number N of cosine modes.
    #[arg(long, default_value_t = 16)]
    modes: usize,
    /// Newton tolerance on the relative residual.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) => Failure::Invalid(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

/// Rendered output and whether it carries warnings.
struct Report {
    body: String,
    warnings: Vec<String>,
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn check_alpha(alpha: f64) -> Result<(), Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("--alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_range(name: &str, v: usize, lo: usize, hi: usize) -> Result<(), Failure> {
    if v < lo || v > hi {
        return Err(invalid(format!("{name} must lie in [{lo}, {hi}], got {v}")));
    }
    Ok(())
}

fn check_positive(name: &str, v: f64) -> Result<(), Failure> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("{name} must be finite and > 0, got {v}")));
    }
    Ok(())
}

impl BranchArgs {
    fn validate(&self) -> Result<(), Failure> {
        check_alpha(self.alpha)?;
        check_range("--modes", self.modes, 2, MAX_MODES)?;
        check_range("--m", self.m, 1, self.modes)?;
        check_range("--steps", self.steps, 1, MAX_STEPS)?;
        check_positive("--a-max", self.a_max)?;
        if self.a_max > 0.5 {
            return Err(invalid(format!(
                "--a-max is a fraction of R_m and must not exceed 0.5, got {}",
                self.a_max
            )));
        }
        check_positive("--tol", self.tol)?;
        Ok(())
    }
}

fn render(table: &Table, format: Format) -> Result<String, Failure> {
    match format {
        Format::Csv => table
            .to_csv()
            .map_err(|e| Failure::Numerical(format!("CSV output: {e}"))),
        Format::Json => Ok(table.to_json()),
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

fn cmd_spectrum(alpha: f64, radius: Option<f64>, k_max: usize, format: Format) -> Result<Report, Failure> {
    check_alpha(alpha)?;
    if let Some(r) = radius {
        check_positive("--radius", r)?;
    }
    check_range("--k-max", k_max, 0, MAX_K)?;
    let p = KernelParams::new(alpha)?;
    let r = match radius {
        Some(r) => r,
        None => r1(&p)?,
    };
    let scale = mu_k(&p, r, 0)?.abs();
    let mut table = Table::new(&["k", "mu_k_closed", "mu_k_quadrature", "rel_dev"]);
    for k in 0..=k_max {
        let closed = mu_k(&p, r, k)?;
        let quad = mu_k_quadrature(&p, r, k)?;
        let dev = (closed - quad).abs() / closed.abs().max(scale);
        table.push(vec![
            Cell::Int(k as i64),
            Cell::Num(closed),
            Cell::Num(quad),
            Cell::Num(dev),
        ]);
    }
    Ok(Report {
        body: render(&table, format)?,
        warnings: Vec::new(),
    })
}

fn cmd_radii(alpha: f64, m_max: usize, format: Format) -> Result<Report, Failure> {
    check_alpha(alpha)?;
    check_range("--m", m_max, 1, MAX_K)?;
    let p = KernelParams::new(alpha)?;
    let radii = bifurcation_radii(&p, m_max)?;
    let mut table = Table::new(&["m", "R_m", "mu_m_at_Rm"]);
    for (i, &rm) in radii.radii.iter().enumerate() {
        let m = i + 1;
        table.push(vec![Cell::Int(m as i64), Cell::Num(rm), Cell::Num(mu_k(&p, rm, m)?)]);
    }
    Ok(Report {
        body: render(&table, format)?,
        warnings: Vec::new(),
    })
}

#[derive(Serialize)]
struct PointDoc {
    a: f64,
    gamma: f64,
    coeffs: Vec<f64>,
    residual_inf: f64,
    nmc_value: f64,
    nmc_flatness: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct BranchDoc {
    alpha: f64,
    m: usize,
    r_m: f64,
    n_modes: usize,
    tol: f64,
    points: Vec<PointDoc>,
    symmetry_check: SymmetryReport,
    warnings: Vec<String>,
}

fn solve_branch(args: &BranchArgs) -> Result<(KernelParams, BranchSolver, BranchCurve), Failure> {
    args.validate()?;
    let p = KernelParams::new(args.alpha)?;
    let solver = BranchSolver::new(&p, args.m, args.modes)?.with_tolerance(args.tol);
    let curve = solver.continue_branch(args.a_max * solver.r_m, args.steps)?;
    Ok((p, solver, curve))
}

fn cmd_branch(args: &BranchArgs, format: Format) -> Result<Report, Failure> {
    let (_, solver, curve) = solve_branch(args)?;
    let points = curve
        .points
        .iter()
        .map(|pt| {
            Ok(PointDoc {
                a: pt.a,
                gamma: pt.gamma,
                coeffs: pt.v.coeffs.clone(),
                residual_inf: pt.residual_inf,
                nmc_value: pt.nmc_value,
                nmc_flatness: solver.flatness(pt)?,
                iterations: pt.iterations,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let body = match format {
        Format::Json => json(&BranchDoc {
            alpha: curve.alpha,
            m: curve.m,
            r_m: curve.r_m,
            n_modes: curve.n_modes,
            tol: solver.tol,
            points,
            symmetry_check: symmetry_check(&curve),
            warnings: curve.warnings.clone(),
        }),
        Format::Csv => {
            let mut header: Vec<String> = ["a", "gamma", "residual_inf", "nmc_value", "nmc_flatness"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            header.extend((0..=curve.n_modes).map(|j| format!("c_{j}")));
            let mut table = Table::with_header(header);
            for pt in &points {
                let mut row = vec![
                    Cell::Num(pt.a),
                    Cell::Num(pt.gamma),
                    Cell::Num(pt.residual_inf),
                    Cell::Num(pt.nmc_value),
                    Cell::Num(pt.nmc_flatness),
                ];
                row.extend(pt.coeffs.iter().map(|&c| Cell::Num(c)));
                table.push(row);
            }
            render(&table, format)?
        }
    };
    Ok(Report {
        body,
        warnings: curve.warnings,
    })
}

#[derive(Serialize)]
struct RayleighPoint {
    a: f64,
    gamma: f64,
    rayleigh: f64,
}

#[derive(Serialize)]
struct SigmaDoc {
    a_fit: f64,
    sigma_fit: f64,
    quartic: f64,
    relative_residual: f64,
    sigma_analytic: f64,
}

#[derive(Serialize)]
struct RayleighDoc {
    alpha: f64,
    m: usize,
    r_m: f64,
    n_modes: usize,
    points: Vec<RayleighPoint>,
    sigma: Option<SigmaDoc>,
    warnings: Vec<String>,
}

fn cmd_rayleigh(args: &BranchArgs, format: Format) -> Result<Report, Failure> {
    let (p, solver, curve) = solve_branch(args)?;
    let points = curve
        .points
        .iter()
        .map(|pt| {
            Ok(RayleighPoint {
                a: pt.a,
                gamma: pt.gamma,
                rayleigh: rayleigh_at(&p, &curve, pt)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mut warnings = curve.warnings.clone();
    let sigma = if args.m == 1 {
        let a_fit = args.a_max * solver.r_m * (1.0 + 1e-9);
        match sigma_fit_route(&p, &curve, a_fit) {
            Ok(fit) => Some(SigmaDoc {
                a_fit,
                sigma_fit: fit.sigma,
                quartic: fit.quartic,
                relative_residual: fit.relative_residual,
                sigma_analytic: sigma_specfun_route(&p, solver.r_m)?,
            }),
            Err(e) => {
                warnings.push(format!("σ fit unavailable: {e}"));
                None
            }
        }
    } else {
        None
    };
    let body = match format {
        Format::Json => json(&RayleighDoc {
            alpha: curve.alpha,
            m: curve.m,
            r_m: curve.r_m,
            n_modes: curve.n_modes,
            points,
            sigma,
            warnings: warnings.clone(),
        }),
        Format::Csv => {
            let mut table = Table::new(&["a", "gamma", "rayleigh"]);
            for pt in &points {
                table.push(vec![Cell::Num(pt.a), Cell::Num(pt.gamma), Cell::Num(pt.rayleigh)]);
            }
            render(&table, format)?
        }
    };
    Ok(Report { body, warnings })
}

fn verdict_name(v: i8) -> &'static str {
    match v {
        -1 => "unstable",
        1 => "stable",
        _ => "degenerate",
    }
}

fn cmd_sweep(lo: f64, hi: f64, points: usize, format: Format) -> Result<Report, Failure> {
    check_alpha(lo)?;
    check_alpha(hi)?;
    if lo >= hi {
        return Err(invalid(format!(
            "--alpha-min must be below --alpha-max, got {lo} ≥ {hi}"
        )));
    }
    check_range("--points", points, 1, MAX_POINTS)?;
    let rows = stability_sweep(&chebyshev_grid(lo, hi, points));
    let mut table = Table::new(&[
        "alpha",
        "R1",
        "sigma_integral",
        "sigma_specfun",
        "sigma_scaled",
        "scaled_radius",
        "verdict",
        "status",
    ]);
    let mut warnings = Vec::new();
    for r in &rows {
        if r.status != "ok" {
            warnings.push(format!("α = {}: {}", r.alpha, r.status));
        }
        table.push(vec![
            Cell::Num(r.alpha),
            Cell::Num(r.r1),
            Cell::Num(r.sigma_integral),
            Cell::Num(r.sigma_specfun),
            Cell::Num(r.sigma_scaled()),
            Cell::Num(r.scaled_radius()),
            Cell::Text(verdict_name(r.verdict).into()),
            Cell::Text(r.status.clone()),
        ]);
    }
    Ok(Report {
        body: render(&table, format)?,
        warnings,
    })
}

fn cmd_oracle(tol: f64, alpha: Option<f64>, k_max: usize, format: Format) -> Result<Report, Failure> {
    check_positive("--tol", tol)?;
    if let Some(a) = alpha {
        check_alpha(a)?;
    }
    check_range("--k-max", k_max, 0, MAX_K)?;
    let alphas: Vec<f64> = alpha.map(|a| vec![a]).unwrap_or_else(|| ORACLE_ALPHAS.to_vec());
    let checks = oracle_suite_with(&alphas, &ORACLE_RADII, k_max, tol)?;
    let mut table = Table::new(&[
        "quantity",
        "alpha",
        "radius",
        "k",
        "closed",
        "quadrature",
        "rel_dev",
        "pass",
    ]);
    for c in &checks {
        table.push(vec![
            Cell::Text(c.quantity.clone()),
            Cell::Num(c.alpha),
            c.radius.map_or(Cell::Empty, Cell::Num),
            c.k.map_or(Cell::Empty, |k| Cell::Int(k as i64)),
            Cell::Num(c.closed),
            Cell::Num(c.quadrature),
            Cell::Num(c.rel_dev),
            Cell::Bool(c.pass),
        ]);
    }
    let body = render(&table, format)?;
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(Failure::Numerical(format!(
            "{failed} of {} oracle checks exceed the tolerance {tol:e}\n{body}",
            checks.len()
        )));
    }
    Ok(Report {
        body,
        warnings: Vec::new(),
    })
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("NLD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| invalid(format!("NLD_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Numerical(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    configure_threads()?;
    match &cli.command {
        Command::Spectrum { alpha, radius, k_max } => cmd_spectrum(*alpha, *radius, *k_max, cli.format),
        Command::Radii { alpha, m } => cmd_radii(*alpha, *m, cli.format),
        Command::Branch(args) => cmd_branch(args, cli.format),
        Command::StabilitySweep {
            alpha_min,
            alpha_max,
            points,
        } => cmd_sweep(*alpha_min, *alpha_max, *points, cli.format),
        Command::Rayleigh(args) => cmd_rayleigh(args, cli.format),
        Command::OracleSuite { tol, alpha, k_max } => cmd_oracle(*tol, *alpha, *k_max, cli.format),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &report.body),
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(report.body.as_bytes())
                }
            };
            if let Err(e) = written {
                eprintln!("error: cannot write output: {e}");
                return ExitCode::from(3);
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if report.warnings.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
