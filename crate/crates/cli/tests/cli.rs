use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const MINIMAL: &str = r#"
seed = 7
seeds = [0]
epochs = 3

[model]
marginal = "uniform-sphere"
w_star = [0.6, 0.8]
conditional = { kind = "powered-margin", kappa = 1.0, clamp = 1.0 }

[update]
kind = "zero-one"

[schedule]
mode = "fixed"
n = 200
"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfspace-active"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_into(config: &str, out: &Path) -> Output {
    bin(&["run", "--config", config, "--out", out.to_str().unwrap()])
}

#[test]
fn run_prints_one_row_per_epoch() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let o = run_into(&cfg, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let header = text.lines().position(|l| l.contains("chord_error")).unwrap();
    let rows: Vec<&str> = text.lines().skip(header + 1).take_while(|l| !l.starts_with("wrote")).collect();
    assert_eq!(rows.len(), 3, "{text}");

    let records = std::fs::read_to_string(dir.path().join("run_records.json")).unwrap();
    let line: serde_json::Value = serde_json::from_str(records.lines().next().unwrap()).unwrap();
    assert_eq!(line["epochs"].as_array().unwrap().len(), 3);
    assert_eq!(line["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn run_records_are_byte_identical_across_executions() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_into(&cfg, &a).status.code(), Some(0));
    assert_eq!(run_into(&cfg, &b).status.code(), Some(0));
    let a = std::fs::read(a.join("run_records.json")).unwrap();
    let b = std::fs::read(b.join("run_records.json")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn seed_flag_changes_the_digest() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out = dir.path().to_str().unwrap();
    let read = || std::fs::read_to_string(dir.path().join("run_records.json")).unwrap();
    assert_eq!(bin(&["run", "--config", &cfg, "--out", out]).status.code(), Some(0));
    let first = read();
    assert_eq!(bin(&["run", "--config", &cfg, "--out", out, "--seed", "8"]).status.code(), Some(0));
    assert_ne!(first, read());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &format!("{MINIMAL}\n[passive]\nceiling = 3\n"));
    let o = run_into(&cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("ceiling"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), MINIMAL);
    let o = bin(&["run", "--config", &cfg, "--set", "model.tau=1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tau"));
}

#[test]
fn run_without_config_is_a_usage_error() {
    assert_eq!(bin(&["run"]).status.code(), Some(2));
    assert_eq!(bin(&["run", "--config", "/nonexistent/config.toml"]).status.code(), Some(2));
}

#[test]
fn curve_writes_one_row_per_target_and_flags_censoring() {
    let dir = TempDir::new().unwrap();
    let body = format!("{MINIMAL}\n[passive]\ncap = 4\nbootstrap_resamples = 50\n")
        .replacen("seed = 7", "seed = 7\nepsilons = [1.0, 0.01]", 1);
    let cfg = write_config(dir.path(), &body);
    let o = bin(&["curve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let text = std::fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_digest="));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let censored = header.iter().position(|&h| h == "censored").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    // Four labels are enough for a chord error of 1 but not of 0.01.
    assert_eq!(rows[0][censored], "false", "{text}");
    assert_eq!(rows[1][censored], "true", "{text}");
}

#[test]
fn curve_with_no_seeds_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let body = MINIMAL.replace("seeds = [0]", "seeds = []\nepsilons = [0.2]");
    let cfg = write_config(dir.path(), &body);
    let o = bin(&["curve", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn check_only_runs_the_selected_suites() {
    let dir = TempDir::new().unwrap();
    let o = bin(&["check", "--only", "psi", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r.starts_with("psi-")), "{text}");

    let o = bin(&["check", "--only", "nonsense", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_with_an_inflated_constant_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[checks]\nlemma_c = 5.0\nlemma_pairs = 4\nlemma_n_mc = 20000\n");
    let o = bin(&["check", "--config", &cfg, "--only", "lemma", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let text = std::fs::read_to_string(dir.path().join("checks.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("gaussian-lower-bound") && l.ends_with("false")));
}

#[test]
fn psi_table_for_the_exponential_loss() {
    let o = bin(&["psi-table", "--loss", "exponential", "--step", "0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("z,psi,psi_numeric,lower_bound"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 10);
    assert_eq!(rows[0], vec![0.0; 4]);
    for r in &rows {
        assert!(r[1] >= r[3], "{r:?}");
    }
}

#[test]
fn psi_table_rejects_unknown_losses_and_bad_steps() {
    assert_eq!(bin(&["psi-table", "--loss", "hinge-squared"]).status.code(), Some(2));
    assert_eq!(bin(&["psi-table", "--loss", "exponential", "--step", "0"]).status.code(), Some(2));
}

#[test]
fn budget_reports_the_kappa_threshold() {
    let o = bin(&["budget"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("kappa_0 = 1.28078"), "{text}");
    assert!(text.contains("26136"));
    assert!(text.contains("log branch"));
}

#[test]
fn budget_rejects_inconsistent_constants() {
    let budget = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/budget.toml");
    assert_eq!(bin(&["budget", "--config", budget]).status.code(), Some(0));
    let o = bin(&["budget", "--config", budget, "--set", "theory.kappa=0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("κ must be"), "{}", stderr(&o));
    let o = bin(&["budget", "--config", budget, "--set", "theory.gamma_plus=2.0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bin(&["budget", "--epsilon", "3"]);
    assert_eq!(o.status.code(), Some(2));
}
