use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heom_cli::compare::{compare, parse_thresholds, parse_window};
use heom_cli::config::parse_config_str;
use heom_cli::table::Table;
use heom_cli::{EXIT_ERROR, EXIT_OK, EXIT_THRESHOLD};

fn heom(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &str = r#"{"basis":{"k":4},"hierarchy":{"n_max":2},"integrator":{"steps":96}}"#;

#[test]
fn empty_config_is_the_benchmark() {
    let c = parse_config_str("").unwrap();
    let m = c.model();
    assert_eq!(
        (m.system.omega_s, m.bath.strength, m.bath.cutoff),
        (2.0, 1.0, 4.0)
    );
    assert_eq!((m.basis.k, m.hierarchy.n_max), (10, 5));
    assert_eq!(
        (m.integrator.dt, m.integrator.steps, m.integrator.stride),
        (3.125e-3, 800, 32)
    );
    assert_eq!(m.grid().unwrap().len(), 44);
    assert_eq!(parse_config_str("{}").unwrap(), c);
}

#[test]
fn bad_values_and_keys_are_named() {
    let err = format!(
        "{:#}",
        parse_config_str(r#"{"system":{"dq":0}}"#).unwrap_err()
    );
    assert!(err.contains("dq"), "{err}");
    let err = format!(
        "{:#}",
        parse_config_str(r#"{"system":{"dQ":0.25}}"#).unwrap_err()
    );
    assert!(err.contains("dQ"), "{err}");
    let err = format!(
        "{:#}",
        parse_config_str(r#"{"bath":{"beta":"warm"}}"#).unwrap_err()
    );
    assert!(err.contains("beta"), "{err}");
}

#[test]
fn sizing_note_for_large_hierarchy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "big.json",
        r#"{"basis":{"k":20},"hierarchy":{"n_max":5,"max_states":1000}}"#,
    );
    let out = heom(&[
        "run",
        "--config",
        s(&cfg),
        "--out",
        s(&dir.path().join("x.csv")),
    ]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("53130 states"), "{stderr}");
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
}

#[test]
fn finite_temperature_bath_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t.json", r#"{"bath":{"beta":0.5}}"#);
    let out_path = dir.path().join("lambda.csv");
    let out = heom(&["bath-table", "--config", s(&cfg), "--out", s(&out_path)]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let table = Table::read(&out_path).unwrap();
    let expected = [
        5.65e-3, 3.24e-2, 5.76e-2, 1.57e-1, 2.88e-1, 3.43e-1, 5.92e-1, 6.25e-1, 8.47e-1, 8.72e-1,
    ];
    for (row, e) in table.rows.iter().zip(expected) {
        assert!(
            (row[1] - e).abs() / e < 0.02,
            "λ_{} = {} vs {e}",
            row[0],
            row[1]
        );
    }
    assert!(dir.path().join("lambda.csv.config.json").exists());
}

#[test]
fn runs_are_reproducible_and_self_compare_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.json", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(
        heom(&["run", "--config", s(&cfg), "--out", s(&a)])
            .status
            .code(),
        Some(EXIT_OK)
    );
    assert_eq!(
        heom(&["--threads", "1", "run", "--config", s(&cfg), "--out", s(&b)])
            .status
            .code(),
        Some(EXIT_OK)
    );
    let text = std::fs::read(&a).unwrap();
    assert_eq!(text, std::fs::read(&b).unwrap());
    let header = String::from_utf8_lossy(&text)
        .lines()
        .next()
        .unwrap()
        .to_owned();
    assert_eq!(
        header,
        "t_eVinv,wSt,xi_q,xi_p,xi_qq,xi_pp,norm,w0,w1,w2,n_mean,raw_norm,raw_q,raw_p,raw_qq,raw_pp"
    );
    assert!(!String::from_utf8_lossy(&text).contains('\r'));

    let out = heom(&["compare", s(&a), s(&b), "--threshold", "xi_q=0"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let report = String::from_utf8_lossy(&out.stdout);
    for line in report.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[1].parse::<f64>().unwrap(), 0.0, "{line}");
    }

    let echo: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("a.csv.config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(echo["hierarchy"]["n_max"], 2);
    assert_eq!(echo["bath"]["beta"], "zero");
}

#[test]
fn compare_flags_threshold_and_schema_problems() {
    let mut a = Table::new(
        ["t_eVinv", "wSt", "xi_q", "xi_p", "xi_qq", "xi_pp"]
            .map(String::from)
            .to_vec(),
    );
    a.rows = (0..5)
        .map(|i| vec![i as f64 * 0.5, i as f64, 0.1, 0.2, 0.3, 0.4])
        .collect();
    let mut b = a.clone();
    b.rows[4][2] = 0.5;
    let th = parse_thresholds("xi_q=0.05").unwrap();
    let d = compare(&a, &b, parse_window("0:3").unwrap(), &th).unwrap();
    assert!(d.iter().all(|c| c.passes()));
    let d = compare(&a, &b, parse_window(":").unwrap(), &th).unwrap();
    let q = d.iter().find(|c| c.column == "xi_q").unwrap();
    assert!(!q.passes());
    assert!((q.max_abs - 0.4).abs() < 1e-15);

    b.rows[1][2] = f64::NAN;
    let d = compare(&a, &b, parse_window("0:3").unwrap(), &th).unwrap();
    assert!(!d.iter().find(|c| c.column == "xi_q").unwrap().passes());

    let mut c = a.clone();
    c.header[2] = "q".into();
    assert!(compare(&a, &c, (0.0, 4.0), &[]).is_err());
    let mut shifted = a.clone();
    shifted.rows[2][1] = 2.5;
    assert!(compare(&a, &shifted, (0.0, 4.0), &[]).is_err());
    assert!(parse_window("3:1").is_err());
    assert!(parse_thresholds("xi_q").is_err());
}

#[test]
fn compare_exit_code_reflects_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = Table::new(
        ["t_eVinv", "wSt", "xi_q", "xi_p", "xi_qq", "xi_pp"]
            .map(String::from)
            .to_vec(),
    );
    a.rows = vec![vec![0.0, 0.0, 1.0, 0.0, 0.5, 0.5]];
    let mut b = a.clone();
    b.rows[0][2] = 1.1;
    a.write(&dir.path().join("a.csv")).unwrap();
    b.write(&dir.path().join("b.csv")).unwrap();
    let (pa, pb) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert_eq!(
        heom(&["compare", s(&pa), s(&pb), "--threshold", "xi_q=0.2"])
            .status
            .code(),
        Some(EXIT_OK)
    );
    assert_eq!(
        heom(&["compare", s(&pa), s(&pb), "--threshold", "xi_q=0.05"])
            .status
            .code(),
        Some(EXIT_THRESHOLD)
    );
}

#[test]
fn hierarchy_follows_moments_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n3.json",
        r#"{"hierarchy":{"n_max":3},"integrator":{"steps":640},"oracle":{"modes":48}}"#,
    );
    let run = dir.path().join("run.csv");
    let exact = dir.path().join("exact.csv");
    assert_eq!(
        heom(&["run", "--config", s(&cfg), "--out", s(&run)])
            .status
            .code(),
        Some(EXIT_OK)
    );
    let out = heom(&["oracle-moments", "--config", s(&cfg), "--out", s(&exact)]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = heom(&[
        "compare",
        s(&run),
        s(&exact),
        "--window",
        "0:4",
        "--threshold",
        "xi_q=0.05,xi_p=0.05",
    ]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn discrete_oracle_matches_discrete_hierarchy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "disc.json",
        r#"{"bath":{"density":"discrete","modes":[{"frequency":1.5,"coupling":0.3},{"frequency":3.0,"coupling":0.4}]},
            "basis":{"kind":"discrete_exponential"},"hierarchy":{"n_max":8},"oracle":{"n_cut":8},
            "integrator":{"steps":320}}"#,
    );
    let run = dir.path().join("run.csv");
    let exact = dir.path().join("cc.csv");
    assert_eq!(
        heom(&["run", "--config", s(&cfg), "--out", s(&run)])
            .status
            .code(),
        Some(EXIT_OK)
    );
    let out = heom(&["oracle-discrete", "--config", s(&cfg), "--out", s(&exact)]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let th = "xi_q=1e-6,xi_p=1e-6,xi_qq=1e-6,xi_pp=1e-6,norm=1e-6";
    let out = heom(&["compare", s(&run), s(&exact), "--threshold", th]);
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
}

#[test]
fn lambda_t_starts_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "l.json",
        r#"{"basis":{"k":4},"integrator":{"steps":64}}"#,
    );
    let out_path = dir.path().join("lt.csv");
    assert_eq!(
        heom(&["lambda-t", "--config", s(&cfg), "--out", s(&out_path)])
            .status
            .code(),
        Some(EXIT_OK)
    );
    let t = Table::read(&out_path).unwrap();
    assert_eq!(t.header, ["t_eVinv", "Omega_t", "k", "kp", "re", "im"]);
    assert_eq!(t.rows.len(), 3 * 16);
    for row in t.rows.iter().take(16).filter(|r| r[2] != r[3]) {
        assert!(row[4].abs() < 1e-10 && row[5].abs() < 1e-10);
    }
}

#[test]
fn missing_config_is_an_error() {
    let out = heom(&["run", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(EXIT_ERROR));
    assert_eq!(heom(&["frobnicate"]).status.code(), Some(2));
}
