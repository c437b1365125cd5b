use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gauge-hamilton"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn price_bs_matches_closed_form() {
    let v = json(&run(&["price", "--model", "bs", "--k", "100"]));
    assert!((v["closed_form"].as_f64().unwrap() - 10.450583572185565).abs() < 1e-9);
    assert!(v["rel_err"].as_f64().unwrap() < 5e-3);
}

#[test]
fn report_keys_are_sorted() {
    let out = run(&["price", "--k", "100"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let keys: Vec<&str> = text.lines().filter_map(|l| l.trim().strip_prefix('"')?.split('"').next()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn missing_strike_is_a_usage_error() {
    assert_eq!(run(&["price"]).status.code(), Some(2));
    assert_eq!(run(&["payoff-table"]).status.code(), Some(2));
}

#[test]
fn config_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"k": 100, "sigma": 0.3}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let from_cfg = json(&run(&["--config", c, "price"]));
    let overridden = json(&run(&["--config", c, "price", "--sigma", "0.2"]));
    assert!(from_cfg["closed_form"].as_f64().unwrap() > 14.0);
    assert!((overridden["closed_form"].as_f64().unwrap() - 10.450583572185565).abs() < 1e-9);

    std::fs::write(&cfg, r#"{"strike": 100}"#).unwrap();
    assert_eq!(run(&["--config", c, "price"]).status.code(), Some(2));
}

#[test]
fn gated_checks_pass() {
    let v = json(&run(&["check", "--what", "bs-limit"]));
    assert_eq!(v["pass"], Value::Bool(true));
    assert_eq!(v["residual"].as_f64(), Some(0.0));
    let v = json(&run(&["check", "--what", "commutator", "--theta", "linear", "--omega", "1"]));
    assert!(v["pass"].as_bool().unwrap() && v["residual"].as_f64().unwrap() > 1e-6);
    let v = json(&run(&["check", "--what", "commutator", "--theta", "constant"]));
    assert_eq!(v["residual"].as_f64(), Some(0.0));
    let v = json(&run(&["check", "--what", "expansion"]));
    assert!(v["pass"].as_bool().unwrap() && v["residual"].as_f64().unwrap() <= v["tolerance"].as_f64().unwrap());
    for key in ["name", "residual", "tolerance", "pass"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn report_only_checks_exit_zero() {
    let v = json(&run(&["check", "--what", "volcoeff"]));
    assert_eq!(v["report_only"], Value::Bool(true));
    let v = json(&run(&["check", "--what", "eq22"]));
    assert_eq!(v["pass"], Value::Bool(false));
    assert!(v["literal_vs_left"].as_f64().unwrap() > 1e-3);
}

#[test]
fn unknown_check_is_a_usage_error() {
    assert_eq!(run(&["check", "--what", "nonsense"]).status.code(), Some(2));
}

#[test]
fn martingale_roots() {
    let v = json(&run(&["martingale", "--mu", "-3", "--lambda", "2"]));
    let y: Vec<f64> = v["roots_y"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(y.len(), 2);
    assert!(y[0].abs() < 1e-12 && (y[1] - std::f64::consts::LN_2).abs() < 1e-12);
    let v = json(&run(&["martingale", "--mu", "1", "--lambda", "1"]));
    assert_eq!(v["no_equilibrium"], Value::Bool(true));
}

#[test]
fn degenerate_input_is_a_numerical_failure() {
    let out = run(&["martingale", "--mu", "1", "--lambda", "1", "--a", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn gauge_martingale_sums() {
    let v = json(&run(&["gauge-martingale", "--r", "0.02", "--sigma", "0.2"]));
    let s: Vec<f64> = v["sums"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(s[0], 1.0);
    assert!((s[1] + 1.0).abs() < 1e-12);
}

fn csv_rows(out: &Output) -> (Vec<String>, Vec<Vec<f64>>) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

#[test]
fn surface_drift_column_flips_with_sign_of_half_variance_minus_rate() {
    let base = ["surface", "--hamiltonian", "bs", "--sigma-mode", "constant", "--r", "0.05", "--nx", "11", "--ny", "5"];
    let (h, low) = csv_rows(&run(&[&base[..], &["--sigma", "0.2"]].concat()));
    let (_, high) = csv_rows(&run(&[&base[..], &["--sigma", "0.4"]].concat()));
    assert_eq!(h, ["x", "y", "reference", "d2x", "d1x", "const", "value"]);
    for (a, b) in low.iter().zip(&high) {
        assert!(a[4] < 0.0 && b[4] > 0.0, "{a:?} {b:?}");
    }
}

#[test]
fn gauge_surface_matches_bs_on_y_constant_reference() {
    let base = ["surface", "--reference", "exp", "--nx", "9", "--ny", "7"];
    let (_, bs) = csv_rows(&run(&[&base[..], &["--hamiltonian", "bs"]].concat()));
    let (h, gauge) = csv_rows(&run(&[&base[..], &["--hamiltonian", "gauge"]].concat()));
    let value = h.len() - 1;
    for (k, (a, b)) in bs.iter().zip(&gauge).enumerate() {
        let (i, j) = (k / 7, k % 7);
        if (1..8).contains(&i) && (1..6).contains(&j) {
            assert_eq!(a[bs[0].len() - 1], b[value], "row {k}");
        }
    }
}

#[test]
fn payoff_table_csv() {
    let out = run(&["payoff-table", "--kind", "call", "--k", "42", "--premium", "5", "--s-min", "40", "--s-max", "50", "--n", "11"]);
    let (h, rows) = csv_rows(&out);
    assert_eq!(h, ["S_T", "holder_profit", "writer_profit"]);
    let at47 = rows.iter().find(|r| r[0] == 47.0).unwrap();
    assert_eq!(at47[1], 0.0);
    assert!(rows.iter().all(|r| r[1] + r[2] == 0.0));
}

#[test]
fn simulation_is_reproducible_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("paths.bin");
    let args = ["simulate", "--k", "100", "--paths", "2000", "--steps", "20", "--seed", "5", "--dump", dump.to_str().unwrap()];
    let a = json(&run(&args));
    let b = json(&bin().args(args).env("GAUGE_HAMILTON_THREADS", "1").output().unwrap());
    assert_eq!(a, b);
    assert!(std::fs::metadata(&dump).unwrap().len() > 2000 * 21 * 8);
    let mg = json(&run(&["simulate", "--model", "mg", "--k", "100", "--paths", "500", "--zeta", "0.3", "--mu", "-1", "--lambda", "0.04"]));
    assert!(mg["price"].as_f64().unwrap() > 0.0);
}

#[test]
fn hedge_reports_statistics() {
    let v = json(&run(&["hedge", "--k", "100", "--paths", "2000"]));
    assert_eq!(v["n_steps"].as_u64(), Some(52));
    assert!(v["std"].as_f64().unwrap() > 0.0);
}
