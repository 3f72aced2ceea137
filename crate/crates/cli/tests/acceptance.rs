//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Run with `cargo test --test acceptance`; the whole suite takes a minute or
//! two on one core. Name filters select criteria, e.g. `-- "criterion 7"`.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use halfspace_active::data::{Conditional, DataModel, EstimateMode, Marginal};
use halfspace_active::driver::{
    kappa_threshold, nk_convex, nk_nonconvex, run_active_on_model, total_label_bound, TheoryConstants,
};
use halfspace_active::geometry::UnitVector;
use halfspace_active::harness::stats::median;
use halfspace_active::harness::{
    gap_scaling, gradient_checks, label_complexity_curve, lemma_bounds_report, psi_checks, query_rule_equivalence,
    CheckConfig, CheckRow, ExperimentConfig,
};
use halfspace_active::rng::SeedTree;
use halfspace_active::solvers::{erm_zero_one_2d, zero_one_errors};
use halfspace_active::Example;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    let text = std::fs::read_to_string(configs().join(name)).expect("shipped config exists");
    toml::from_str(&text).expect("shipped config parses")
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn all_pass(rows: &[CheckRow]) -> (usize, usize) {
    (rows.iter().filter(|r| r.pass).count(), rows.len())
}

fn tree(criterion: u64) -> SeedTree {
    SeedTree::new(20_240_601).child("criterion", criterion)
}

fn query_equivalence() -> Verdict {
    let cfg = CheckConfig::default();
    let (rows, t) = timed(|| query_rule_equivalence(&cfg, &tree(1)).unwrap());
    let agree: f64 = rows.iter().map(|r| r.observed).fold(f64::INFINITY, f64::min);
    let cells = rows.len();
    let (ok, _) = all_pass(&rows);
    Verdict::new(
        ok == cells && cells == 15 && t < Duration::from_secs(10),
        format!(
            "{cells} cells of {} draws, lowest agreement {agree}, {:.2}s",
            cfg.equivalence_samples,
            t.as_secs_f64()
        ),
    )
}

fn psi_transform() -> Verdict {
    let rows = psi_checks(1e-6).unwrap();
    let worst = rows
        .iter()
        .filter(|r| r.check_name == "psi-closed-vs-numeric")
        .map(|r| r.observed)
        .fold(0.0, f64::max);
    let (ok, n) = all_pass(&rows);
    let lower = rows.iter().filter(|r| r.check_name == "psi-lower-bound").count();
    Verdict::new(
        ok == n && lower == 19,
        format!("{ok}/{n} rows, worst closed-vs-numeric gap {worst:.2e}, ψ ≥ z²/2 on {lower} grid points"),
    )
}

fn sphere(d: usize) -> DataModel<f64> {
    let mut w = vec![0.0; d];
    w[0] = 1.0;
    DataModel::new(Marginal::UniformSphere, Conditional::PoweredMargin { kappa: 1.0, clamp: 1.0 }, w).unwrap()
}

fn sphere_identity() -> Verdict {
    let (rows, t) = timed(|| {
        let mut rows = Vec::new();
        for d in [2, 5] {
            rows.extend(lemma_bounds_report(&sphere(d), 20, 1_000_000, 1.0 / PI, &tree(3).child("d", d as u64)).unwrap());
        }
        rows
    });
    let worst = rows
        .iter()
        .map(|r| (r.observed - r.bound_or_target.parse::<f64>().unwrap()).abs() / r.sigma)
        .fold(0.0, f64::max);
    let (ok, n) = all_pass(&rows);
    Verdict::new(
        ok == n && n == 40 && t < Duration::from_secs(60),
        format!("{ok}/{n} pairs within 3σ (worst {worst:.2}σ), {:.1}s", t.as_secs_f64()),
    )
}

fn gaussian_lower_bound() -> Verdict {
    let mut w = vec![0.0; 10];
    w[0] = 1.0;
    let model = DataModel::new(Marginal::Gaussian, Conditional::PoweredMargin { kappa: 1.0, clamp: 1.0 }, w).unwrap();
    let rows = lemma_bounds_report(&model, 20, 1_000_000, 1.0 / PI, &tree(4)).unwrap();
    let (ok, n) = all_pass(&rows);
    Verdict::new(ok == n && n == 20, format!("{ok}/{n} pairs satisfy θ/π ≤ p̂ + 3σ in d = 10"))
}

fn gradients() -> Verdict {
    let rows = gradient_checks(100, 1e-5, &tree(5)).unwrap();
    let worst = rows.iter().map(|r| r.observed).fold(0.0, f64::max);
    let (ok, n) = all_pass(&rows);
    Verdict::new(ok == n && n == 100, format!("{ok}/{n} triples, worst relative error {worst:.2e}"))
}

/// Ratio of the median chord error after epoch `k + 1` to that after `k`.
fn convergence() -> Verdict {
    let cfg = load("convergence.toml");
    let model = cfg.model.build().unwrap();
    let run = cfg.run_config(cfg.epochs);
    let (errors, t) = timed(|| {
        cfg.seeds
            .iter()
            .map(|&s| {
                run_active_on_model(&model, &run, s)
                    .unwrap()
                    .chord_errors(model.direction())
                    .unwrap()
            })
            .collect::<Vec<_>>()
    });
    // errors[s][j] is the chord error of w_{j+1}
    let med = |j: usize| median(&errors.iter().map(|e| e[j]).collect::<Vec<_>>());
    let mut pass = t < Duration::from_secs(300);
    let mut parts = Vec::new();
    for k in 2..=5 {
        let ratio = med(k) / med(k - 1);
        let per_seed = median(&errors.iter().map(|e| e[k] / e[k - 1]).collect::<Vec<_>>());
        pass &= ratio <= 0.75;
        parts.push(format!("k={k} {ratio:.3} (per-seed median {per_seed:.3})"));
    }
    Verdict::new(
        pass,
        format!("{} seeds, median ratios {}, {:.1}s", cfg.seeds.len(), parts.join(", "), t.as_secs_f64()),
    )
}

fn label_complexity() -> Verdict {
    let cfg = load("curve.toml");
    let (curve, t) = timed(|| label_complexity_curve(&cfg).unwrap());
    let active = curve.active_log_fit();
    let passive = curve.passive_log_log_fit();
    let ci = curve.passive_slope_interval(cfg.passive.bootstrap_resamples, 0.95, &mut cfg.tree().stream("bootstrap", 0));
    let censored = curve.points.iter().filter(|p| p.censored).count();
    let pass = match (passive, ci) {
        (Some(p), Some(ci)) => {
            active.r_squared >= 0.8 && p.slope >= 1.0 && ci.lo >= 0.5 && censored == 0 && t < Duration::from_secs(1200)
        }
        _ => false,
    };
    Verdict::new(
        pass,
        format!(
            "active R² {:.3}, passive slope {}, 95% CI {}, {censored} censored, {:.0}s",
            active.r_squared,
            passive.map_or("n/a".into(), |p| format!("{:.3}", p.slope)),
            ci.map_or("n/a".into(), |c| format!("[{:.3}, {:.3}]", c.lo, c.hi)),
            t.as_secs_f64()
        ),
    )
}

fn gap_scaling_ratios() -> Verdict {
    let cfg = CheckConfig::default();
    let (rows, t) = timed(|| gap_scaling(&cfg, &tree(8)).unwrap());
    let (ok, n) = all_pass(&rows);
    let ratios: Vec<String> = rows.iter().map(|r| format!("{} {:.3}", r.check_name, r.observed)).collect();
    Verdict::new(
        ok == n && n == 2 && t < Duration::from_secs(300),
        format!("{} in [1.4, 2.8] over {} trials, {:.1}s", ratios.join(", "), cfg.gap.trials, t.as_secs_f64()),
    )
}

/// Minimum error count over 10⁴ equally spaced directions.
fn grid_minimum(data: &[Example]) -> usize {
    (0..10_000)
        .map(|i| {
            let phi = 2.0 * PI * f64::from(i) / 1e4;
            zero_one_errors(&[phi.cos(), phi.sin()], data)
        })
        .min()
        .unwrap()
}

fn exact_zero_one() -> Verdict {
    let mut rng = tree(9).stream("instances", 0);
    let mut mismatches = 0;
    let mut inconsistent = 0;
    for _ in 0..100 {
        let normal = rng.random_range(0.0..2.0 * PI);
        let data: Vec<Example> = (0..50)
            .map(|_| {
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                let clean = if (phi - normal).cos() > 0.0 { 1 } else { -1 };
                let y = if rng.random_bool(0.2) { -clean } else { clean };
                Example::new(vec![phi.cos(), phi.sin()], y).unwrap()
            })
            .collect();
        let start = UnitVector::from_angle(rng.random_range(0.0..2.0 * PI));
        let sol = erm_zero_one_2d(&data, &start, 2.0).unwrap();
        if zero_one_errors(sol.w.as_slice(), &data) != sol.errors {
            inconsistent += 1;
        }
        if sol.errors != grid_minimum(&data) {
            mismatches += 1;
        }
    }
    Verdict::new(
        mismatches == 0 && inconsistent == 0,
        format!("{mismatches}/100 instances differ from the grid minimum, {inconsistent} misreported counts"),
    )
}

fn budget_formulas() -> Verdict {
    let t = TheoryConstants {
        mu: 1.0,
        kappa: 1.0,
        ell_minus: 1.0,
        ell_plus: 1.0,
        gamma_minus: 1.0,
        gamma_plus: 1.0,
        theta_eps: 1.0,
        delta: 0.1,
        d: 2,
        m: 5,
        lipschitz: 1.0,
        norm_bound: 1.0,
        a: 1.0,
        gamma: 2.0,
        floor_enabled: false,
    };
    // Hand-evaluated from the closed forms.
    let checks = [
        ("nk_nonconvex(2)", nk_nonconvex(2, &t).unwrap() as f64, 26136.0, 0.0),
        ("nk_convex(1)", nk_convex(1, &t).unwrap() as f64, 189241.0, 0.0),
        ("nk_convex(2)", nk_convex(2, &t).unwrap() as f64, 47311.0, 0.0),
        ("nk_convex(3)", nk_convex(3, &t).unwrap() as f64, 11828.0, 0.0),
        ("kappa_threshold(2)", kappa_threshold(2.0).unwrap(), 1.280776406404415, 1e-6),
        ("total(α=0, ε=1/4, n0=100)", total_label_bound(0.0, 0.25, 100.0).unwrap(), 400.0, 1e-6),
        ("total(α=1/2, ε=1, n0=1)", total_label_bound(0.5, 1.0, 1.0).unwrap(), 8.0, 1e-6),
        ("total(α=-3, ε=1/4, n0=100)", total_label_bound(-3.0, 0.25, 100.0).unwrap(), 400.0, 1e-6),
    ];
    let failed: Vec<String> = checks
        .iter()
        .filter(|(_, got, want, tol)| (got - want).abs() > *tol)
        .map(|(name, got, want, _)| format!("{name} = {got}, expected {want}"))
        .collect();
    let kappa0 = kappa_threshold(2.0).unwrap();
    Verdict::new(
        failed.is_empty() && (kappa0 - 1.280776).abs() <= 1e-6,
        if failed.is_empty() {
            format!("{} values reproduced, κ₀(2) = {kappa0:.7}", checks.len())
        } else {
            failed.join("; ")
        },
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let config = configs().join("convergence.toml");
    let run = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_halfspace-active"))
            .args(["run", "--seed", "3", "--set", "seeds=[0, 1, 2]", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap()
            .status
            .code()
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let codes = (run(&a), run(&b));
    let read = |p: &Path| std::fs::read(p.join("run_records.json")).unwrap_or_default();
    let (a, b) = (read(&a), read(&b));
    Verdict::new(
        codes == (Some(0), Some(0)) && !a.is_empty() && a == b,
        format!("exit codes {codes:?}, {} and {} bytes, identical: {}", a.len(), b.len(), a == b),
    )
}

fn tsybakov() -> Verdict {
    let grid: Vec<f64> = (1..=8).map(|i| f64::from(i) * FRAC_PI_4 / 8.0).collect();
    let fit = |kappa: f64| {
        let m = DataModel::new(
            Marginal::UniformSphere,
            Conditional::PoweredMargin { kappa, clamp: 1.0 },
            vec![0.6, 0.8],
        )
        .unwrap();
        m.verify_tsybakov_exponent(&grid, EstimateMode::Exact, &mut tree(12).stream("unused", 0))
            .unwrap()
            .kappa_hat
    };
    let (hard, two) = (fit(1.0), fit(2.0));
    Verdict::new(
        (hard - 1.0).abs() <= 0.1 && (1.7..=2.3).contains(&two),
        format!("κ̂ = {hard:.4} for hard labels, {two:.4} for κ = 2"),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("query rule matches the disagreement oracle", query_equivalence),
        ("ψ-transform closed form and lower bound", psi_transform),
        ("sphere disagreement equals θ/π", sphere_identity),
        ("Gaussian disagreement lower bound", gaussian_lower_bound),
        ("surrogate gradients", gradients),
        ("convex-update convergence", convergence),
        ("label-complexity trend", label_complexity),
        ("empirical-process gap scaling", gap_scaling_ratios),
        ("exact 2-D 0-1 ERM", exact_zero_one),
        ("budget formulas", budget_formulas),
        ("run records are deterministic", determinism),
        ("Tsybakov exponent of the generator", tsybakov),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || label == *f) {
            continue;
        }
        let v = check();
        if !v.pass {
            failures += 1;
        }
        println!("{} {label}: {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
