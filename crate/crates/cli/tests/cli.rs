use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sphereshrink"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_result(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let o = run(&all);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_str(&stdout(&o)).unwrap()
}

/// Data rows of a CSV document, skipping `#` comments and the header.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn model_info_gaussian_second_moment() {
    let v = json_result(&["model-info", "--family", "gaussian", "--p", "5"]);
    let e = v["result"]["second_moment"].as_f64().unwrap();
    assert!((e - 5.0).abs() < 1e-10, "{e}");
    assert_eq!(v["config"]["model"]["p"], 5);
}

#[test]
fn model_info_polyexp_moment_and_inf_ratio() {
    let v = json_result(&[
        "model-info",
        "--family",
        "polyexp",
        "--alpha",
        "2",
        "--beta",
        "0.5",
        "--p",
        "5",
    ]);
    let r = &v["result"];
    assert!((r["second_moment"].as_f64().unwrap() - 7.0).abs() < 1e-10);
    assert!((r["inf_F_over_f"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((r["inf_F_over_f_numeric"].as_f64().unwrap() - 1.0).abs() < 1e-4);
}

#[test]
fn malformed_family_exits_two_with_diagnostic() {
    let o = run(&["model-info", "--family", "cauchy", "--p", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("cauchy"));
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_flag_exits_two() {
    assert_eq!(run(&["risk", "--bogus"]).status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["phi", "--help"]).status.code(), Some(0));
}

#[test]
fn check_mixdiff_is_certified() {
    let v = json_result(&[
        "check", "--family", "mixdiff", "--a", "0.5", "--b", "0.5", "--p", "4",
    ]);
    assert_eq!(v["result"]["overall"], "minimax_certified");
    let o = run(&[
        "check", "--family", "mixdiff", "--a", "0.5", "--b", "0.5", "--p", "4",
    ]);
    let text = stdout(&o);
    assert!(text.contains("minimax_certified"));
    assert!(!text.contains("not minimax"));
}

#[test]
fn verify_gegenbauer_example() {
    let o = run(&[
        "verify",
        "--identity",
        "gegenbauer",
        "--alpha",
        "1.5",
        "--a",
        "0.9",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    // params is quoted and contains a comma, so rel_error is the second-last field.
    let rel: f64 = rows[0][rows[0].len() - 2].parse().unwrap();
    assert!(rel <= 1e-8, "{rel}");
}

#[test]
fn verify_accepts_negative_parameters() {
    let o = run(&[
        "verify",
        "--identity",
        "gegenbauer",
        "--alpha",
        "2.5",
        "--a",
        "-0.9",
        "--strict",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn risk_is_byte_identical_across_runs() {
    let args = [
        "risk",
        "--family",
        "gaussian",
        "--p",
        "5",
        "--estimator",
        "harmonic",
        "--theta",
        "0:10:1",
        "--n",
        "200000",
        "--seed",
        "42",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("# config: "));
    assert!(text.contains("\"seed\":42"));
    assert!(text.contains("theta_norm,risk,se,baseline,diff,diff_se,verdict\n"));
    assert!(!text.contains('\r'));
    assert_eq!(csv_rows(&text).len(), 11);
}

#[test]
fn risk_strict_flags_a_worse_estimator() {
    let o = run(&[
        "risk",
        "--family",
        "gaussian",
        "--p",
        "3",
        "--estimator",
        "constant",
        "--constant",
        "1.5",
        "--theta",
        "0,1",
        "--n",
        "2000",
        "--strict",
    ]);
    assert_eq!(o.status.code(), Some(3));
    for row in csv_rows(&stdout(&o)) {
        assert_eq!(row.last().unwrap(), "worse");
    }
}

#[test]
fn strict_check_without_certificate_exits_three() {
    let o = run(&[
        "check", "--family", "polyexp", "--alpha", "8", "--beta", "1", "--p", "3", "--strict",
    ]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&[
        "check", "--family", "polyexp", "--alpha", "8", "--beta", "1", "--p", "3",
    ]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn divergent_moment_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("heavy.csv");
    let mut text = String::from("r,f\n");
    for i in 0..=40 {
        let r = i as f64 * 0.25;
        text += &format!("{r},{}\n", (1.0 + r).powi(-4));
    }
    std::fs::write(&table, text).unwrap();
    let o = run(&[
        "verify",
        "--identity",
        "kernel_mass",
        "--family",
        "tabulated",
        "--table",
        table.to_str().unwrap(),
        "--p",
        "3",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverges"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"model": {"family": "poly_exp", "alpha": 2, "beta": 0.5, "p": 4}}"#,
    )
    .unwrap();
    let v = json_result(&["model-info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(v["config"]["model"]["family"], "polyexp");
    assert!((v["result"]["second_moment"].as_f64().unwrap() - 6.0).abs() < 1e-10);
    let v = json_result(&["model-info", "--config", cfg.to_str().unwrap(), "--p", "5"]);
    assert_eq!(v["config"]["model"]["p"], 5);
    assert!((v["result"]["second_moment"].as_f64().unwrap() - 7.0).abs() < 1e-10);
}

#[test]
fn config_file_unknown_key_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"model": {"family": "gaussian", "dimension": 4}}"#).unwrap();
    let o = run(&["model-info", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dimension"));
}

#[test]
fn echo_includes_defaults() {
    let v = json_result(&["risk", "--p", "3", "--theta", "0", "--n", "100"]);
    let risk = &v["config"]["risk"];
    assert_eq!(risk["seed"], 42);
    assert_eq!(risk["estimator"], "harmonic");
    assert_eq!(risk["block"], 1024);
    assert_eq!(v["config"]["model"]["family"], "gaussian");
    let v = json_result(&["hseq", "--i", "1,10"]);
    assert!(v["config"]["hseq"]["kernel_c"].as_f64().unwrap() > 2.7);
    assert!(v["config"]["hseq"]["eta"].as_array().unwrap().len() > 10);
}

#[test]
fn phi_csv_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("phi.csv");
    let svg = dir.path().join("phi.svg");
    let o = run(&[
        "phi",
        "--family",
        "gaussian",
        "--p",
        "5",
        "--grid",
        "0.1:50:40",
        "--out",
        out.to_str().unwrap(),
        "--plot",
        svg.to_str().unwrap(),
        "--strict",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("r,phi_star,multiplier,limit_value\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 40);
    let last: f64 = rows[39][1].parse().unwrap();
    assert!((last - 3.0).abs() / 3.0 < 0.01);
    let pic = std::fs::read_to_string(&svg).unwrap();
    assert!(pic.starts_with("<svg") && pic.contains("<polyline"));
}

#[test]
fn plot_with_unknown_column_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("x.svg");
    let o = run(&["probe", "--plot", svg.to_str().unwrap(), "--plot-y", "nope"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hseq_and_probe_run() {
    let v = json_result(&["hseq", "--kernel-n", "1"]);
    assert!(v["result"]["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["passed"] == true));
    let v = json_result(&["probe", "--family", "gaussian", "--p", "3", "--r", "10,100"]);
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 2);
}

#[test]
fn prior_reports_brown_and_blyth() {
    let v = json_result(&[
        "prior",
        "--prior",
        "harmonic",
        "--p",
        "3",
        "--gamma",
        "2",
        "--blyth-i",
        "1,4",
    ]);
    let r = &v["result"];
    assert_eq!(r["brown"]["class"], "diverges");
    assert_eq!(r["blyth"].as_array().unwrap().len(), 2);
    let v = json_result(&["prior", "--prior", "power", "--k", "-1.5", "--p", "3"]);
    assert_eq!(v["config"]["prior"]["k"], -1.5);
}

#[test]
fn threads_env_must_be_an_integer() {
    let o = bin()
        .args(["model-info"])
        .env("SPHERESHRINK_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["model-info"])
        .env("SPHERESHRINK_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
}
