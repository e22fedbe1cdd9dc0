use std::process::{Command, Output};

fn nld(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nld"))
        .args(args)
        .output()
        .expect("nld runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(o: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let text = stdout(o);
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

fn seventeen_digits(cell: &str) -> bool {
    let mantissa = cell.trim_start_matches('-').split('e').next().unwrap();
    mantissa.chars().filter(|c| c.is_ascii_digit()).count() == 17
}

#[test]
fn spectrum_table() {
    let o = nld(&["spectrum", "--alpha", "0.5", "--radius", "1.0", "--k-max", "16"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = csv_rows(&o);
    assert_eq!(h, ["k", "mu_k_closed", "mu_k_quadrature", "rel_dev"]);
    assert_eq!(rows.len(), 17);
    let mu: Vec<f64> = rows.iter().map(|r| num(&r[1])).collect();
    assert!(mu[0] < 0.0);
    assert!(mu.windows(2).all(|w| w[0] < w[1]));
    for r in &rows {
        assert!(num(&r[3]) < 1e-8);
        assert!(r[1..].iter().all(|c| seventeen_digits(c)), "{r:?}");
    }
    assert!(stdout(&o).ends_with('\n') && !stdout(&o).contains('\r'));
}

#[test]
fn radii_table() {
    let o = nld(&["radii", "--alpha", "0.5", "--m", "10"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = csv_rows(&o);
    let (rm, res) = (col(&h, "R_m"), col(&h, "mu_m_at_Rm"));
    let r1 = num(&rows[0][rm]);
    for (i, r) in rows.iter().enumerate() {
        assert!(num(&r[res]).abs() < 1e-9);
        assert!((num(&r[rm]) * (i + 1) as f64 - r1).abs() < 1e-12 * r1);
    }
}

#[test]
fn first_radius_shrinks_like_root_of_gap() {
    let r1 = |a: &str| {
        let (h, rows) = csv_rows(&nld(&["radii", "--alpha", a, "--m", "1"]));
        num(&rows[0][col(&h, "R_m")])
    };
    let ratio = r1("0.99") / r1("0.999");
    assert!((ratio / 10f64.sqrt() - 1.0).abs() < 0.1, "ratio {ratio}");
}

#[test]
fn branch_json_for_second_branch() {
    let o = nld(&[
        "branch", "--alpha", "0.6", "--m", "2", "--modes", "16", "--steps", "2", "--a-max", "0.05", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let tol = doc["tol"].as_f64().unwrap();
    let points = doc["points"].as_array().unwrap();
    assert_eq!(points.len(), 5);
    let gamma: Vec<f64> = points.iter().map(|p| p["gamma"].as_f64().unwrap()).collect();
    for i in 0..5 {
        assert!((gamma[i] - gamma[4 - i]).abs() < 1e-8);
    }
    for p in points {
        assert!(p["nmc_flatness"].as_f64().unwrap() < 10.0 * tol);
        let c = p["coeffs"].as_array().unwrap();
        for j in (1..c.len()).step_by(2) {
            assert!(c[j].as_f64().unwrap().abs() < 1e-8, "odd coefficient c_{j}");
        }
    }
    assert!(doc["symmetry_check"]["gamma_defect"].as_f64().unwrap() < 1e-8);
    assert!(doc["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn stability_sweep_table() {
    let o = nld(&["stability-sweep", "--points", "12"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = csv_rows(&o);
    assert_eq!(rows.len(), 12);
    let (si, ss, v, r1) = (
        col(&h, "sigma_integral"),
        col(&h, "sigma_specfun"),
        col(&h, "verdict"),
        col(&h, "R1"),
    );
    for r in &rows {
        assert_eq!(r[v], "unstable");
        let (a, b) = (num(&r[si]), num(&r[ss]));
        assert!((a - b).abs() < 1e-6 * b.abs());
    }
    let radii: Vec<f64> = rows.iter().map(|r| num(&r[r1])).collect();
    assert!(radii.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn rayleigh_first_branch_with_fit() {
    let o = nld(&[
        "rayleigh", "--alpha", "0.6", "--modes", "8", "--steps", "2", "--a-max", "0.05", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    for p in doc["points"].as_array().unwrap() {
        if p["a"].as_f64().unwrap() != 0.0 {
            assert!(p["rayleigh"].as_f64().unwrap() < 0.0);
        }
    }
    let fit = doc["sigma"]["sigma_fit"].as_f64().unwrap();
    let analytic = doc["sigma"]["sigma_analytic"].as_f64().unwrap();
    assert!((fit / analytic - 1.0).abs() < 0.05);
}

#[test]
fn oracle_suite_single_alpha() {
    let o = nld(&["oracle-suite", "--alpha", "0.5", "--k-max", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let (h, rows) = csv_rows(&o);
    let pass = col(&h, "pass");
    assert!(!rows.is_empty() && rows.iter().all(|r| r[pass] == "true"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["stability-sweep", "--points", "6", "--format", "json"];
    assert_eq!(nld(&args).stdout, nld(&args).stdout);
    let args = [
        "branch", "--alpha", "0.4", "--modes", "6", "--steps", "1", "--a-max", "0.02",
    ];
    assert_eq!(nld(&args).stdout, nld(&args).stdout);
}

#[test]
fn output_file() {
    let path = std::env::temp_dir().join(format!("nld-radii-{}.csv", std::process::id()));
    let o = nld(&["radii", "--alpha", "0.3", "--m", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn exit_codes() {
    for args in [
        vec!["spectrum", "--alpha", "1.2"],
        vec!["radii", "--alpha", "0.5", "--m", "0"],
        vec!["branch", "--alpha", "0.5", "--m", "9", "--modes", "8"],
        vec!["stability-sweep", "--alpha-min", "0.7", "--alpha-max", "0.3"],
        vec!["spectrum", "--alpha", "0.5", "--radius", "-1"],
        vec!["nonsense"],
    ] {
        let o = nld(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(o.stdout.is_empty());
    }
    let o = Command::new(env!("CARGO_BIN_EXE_nld"))
        .args(["radii", "--alpha", "0.5"])
        .env("NLD_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = nld(&["oracle-suite", "--alpha", "0.5", "--k-max", "1", "--tol", "1e-20"]);
    assert_eq!(o.status.code(), Some(3));
    let o = nld(&[
        "branch", "--alpha", "0.6", "--modes", "2", "--steps", "1", "--a-max", "0.02", "--tol", "1e-18",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(csv_rows(&o).1.len(), 1);
}

#[test]
fn thread_cap_does_not_change_results() {
    let args = ["stability-sweep", "--points", "4"];
    let capped = Command::new(env!("CARGO_BIN_EXE_nld"))
        .args(args)
        .env("NLD_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(capped.stdout, nld(&args).stdout);
}
