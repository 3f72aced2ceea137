use std::path::Path;
use std::process::ExitCode;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::Table;

use halfspace_active::driver::{
    epochs_for, kappa_threshold, nk_convex, nk_nonconvex, radius, total_label_bound, TheoryConstants,
};
use halfspace_active::harness::{
    label_complexity_curve, run_checks, run_seeds, write_checks_csv, write_curve_csv, write_run_records,
    CheckConfig, CheckRow, ExperimentConfig, HarnessError, OutputHeader, CHECKS_FILE, CURVE_FILE, RUN_RECORDS_FILE,
    SUITES,
};
use halfspace_active::losses::{psi, psi_numeric, Loss, SurrogateLoss};
use halfspace_active::rng::SeedTree;

use crate::config::{digest, load_table, resolve};
use crate::format::{sig6, table};
use crate::{CliError, Common};

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn experiment(common: &Common) -> Result<ExperimentConfig, CliError> {
    if common.config.is_none() {
        return Err(usage("this command needs --config"));
    }
    let cfg: ExperimentConfig = resolve(load_table(common.config.as_deref())?, &common.set, common.seed)?;
    cfg.validate().map_err(usage)?;
    cfg.require_seeds().map_err(usage)?;
    Ok(cfg)
}

fn out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), sig6)
}

pub fn run(common: &Common) -> Result<ExitCode, CliError> {
    let cfg = experiment(common)?;
    let header = OutputHeader {
        config_digest: digest(&cfg),
        seed: cfg.seed,
    };
    let runs = run_seeds(&cfg).map_err(runtime)?;
    let model = cfg.model.build().map_err(usage)?;

    let mut rows = Vec::new();
    let mut failed = 0usize;
    for r in &runs {
        let rec = r.record();
        for e in &rec.epochs {
            rows.push(vec![
                r.index.to_string(),
                e.k.to_string(),
                sig6(e.r_k),
                e.n_k.to_string(),
                e.labels.to_string(),
                opt(e.chord_error),
            ]);
        }
        match &r.result {
            Ok(rec) => {
                let fin = rec.final_chord_error(model.direction()).map_err(runtime)?;
                println!("seed {}: final chord error {}, {} labels", r.index, sig6(fin), rec.total_labels);
            }
            Err(f) => {
                failed += 1;
                eprintln!("seed {}: {f}", r.index);
            }
        }
    }
    print!("{}", table(&["seed", "k", "r_k", "n_k", "labels", "chord_error"], &rows));

    out_dir(&common.out)?;
    let records: Vec<_> = runs.iter().map(|r| r.record().clone()).collect();
    let path = common.out.join(RUN_RECORDS_FILE);
    write_run_records(&path, &records, &header).map_err(runtime)?;
    println!("wrote {}", path.display());
    if failed > 0 {
        return Err(runtime(format!("{failed} of {} runs failed; partial traces written", runs.len())));
    }
    Ok(ExitCode::SUCCESS)
}

pub fn curve(common: &Common) -> Result<ExitCode, CliError> {
    let cfg = experiment(common)?;
    cfg.require_epsilons().map_err(usage)?;
    let header = OutputHeader {
        config_digest: digest(&cfg),
        seed: cfg.seed,
    };
    let curve = label_complexity_curve(&cfg).map_err(runtime)?;

    let rows: Vec<Vec<String>> = curve
        .points
        .iter()
        .map(|p| {
            vec![
                sig6(p.epsilon),
                p.epochs.to_string(),
                sig6(p.labels_active.median),
                format!("[{}, {}]", sig6(p.labels_active.q1), sig6(p.labels_active.q3)),
                sig6(p.labels_passive.median),
                format!("[{}, {}]", sig6(p.labels_passive.q1), sig6(p.labels_passive.q3)),
                p.censored.to_string(),
            ]
        })
        .collect();
    print!(
        "{}",
        table(&["epsilon", "m", "active", "active_iqr", "passive", "passive_iqr", "censored"], &rows)
    );
    if curve.points.len() >= 2 {
        let fit = curve.active_log_fit();
        println!("active labels ≈ {} + {}·log(1/ε), R² = {}", sig6(fit.intercept), sig6(fit.slope), sig6(fit.r_squared));
        if let Some(fit) = curve.passive_log_log_fit() {
            let mut rng = cfg.tree().stream("bootstrap", 0);
            let ci = curve.passive_slope_interval(cfg.passive.bootstrap_resamples, 0.95, &mut rng);
            let ci = ci.map_or_else(|| "n/a".into(), |c| format!("[{}, {}]", sig6(c.lo), sig6(c.hi)));
            println!("passive log-log slope {} (95% bootstrap {ci})", sig6(fit.slope));
        }
    }

    out_dir(&common.out)?;
    let path = common.out.join(CURVE_FILE);
    write_curve_csv(&path, &curve.points, &header).map_err(runtime)?;
    println!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

/// A config holding only the check settings.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckFile {
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    checks: CheckConfig,
}

fn check_settings(common: &Common) -> Result<CheckFile, CliError> {
    let table = load_table(common.config.as_deref())?;
    if table.contains_key("model") {
        let cfg: ExperimentConfig = resolve(table, &common.set, common.seed)?;
        cfg.validate().map_err(usage)?;
        Ok(CheckFile {
            seed: cfg.seed,
            checks: cfg.checks,
        })
    } else {
        resolve(table, &common.set, common.seed)
    }
}

pub fn check(common: &Common, only: &[String]) -> Result<ExitCode, CliError> {
    if let Some(bad) = only.iter().find(|n| !SUITES.contains(&n.as_str())) {
        return Err(usage(format!("unknown check `{bad}` (expected one of {})", SUITES.join(", "))));
    }
    let settings = check_settings(common)?;
    let header = OutputHeader {
        config_digest: digest(&settings),
        seed: settings.seed,
    };
    let rows = run_checks(&settings.checks, only, &SeedTree::new(settings.seed)).map_err(|e| match e {
        HarnessError::Config(_) => usage(e),
        other => runtime(other),
    })?;

    let mut names: Vec<&str> = Vec::new();
    for r in &rows {
        if !names.contains(&r.check_name.as_str()) {
            names.push(&r.check_name);
        }
    }
    let summary: Vec<Vec<String>> = names
        .iter()
        .map(|&name| {
            let of: Vec<&CheckRow> = rows.iter().filter(|r| r.check_name == name).collect();
            let passed = of.iter().filter(|r| r.pass).count();
            vec![
                name.to_string(),
                of.len().to_string(),
                passed.to_string(),
                if passed == of.len() { "pass" } else { "FAIL" }.to_string(),
            ]
        })
        .collect();
    print!("{}", table(&["check", "rows", "passed", "status"], &summary));
    for r in rows.iter().filter(|r| !r.pass) {
        println!(
            "failed: {} [{}] observed {} vs {} (σ {})",
            r.check_name,
            r.parameter,
            sig6(r.observed),
            r.bound_or_target,
            sig6(r.sigma)
        );
    }

    out_dir(&common.out)?;
    let path = common.out.join(CHECKS_FILE);
    write_checks_csv(&path, &rows, &header).map_err(runtime)?;
    println!("wrote {}", path.display());
    if rows.iter().all(|r| r.pass) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(1))
    }
}

pub fn psi_table(loss: &str, step: f64) -> Result<ExitCode, CliError> {
    let loss = Loss::from_str(loss).map_err(usage)?;
    if !(step > 0.0 && step < 1.0) {
        return Err(usage(format!("step must lie in (0, 1), got {step}")));
    }
    let lower = SurrogateLoss::<f64>::psi_lower(&loss);
    println!("z,psi,psi_numeric,lower_bound");
    let mut i = 0u32;
    loop {
        let z = f64::from(i) * step;
        if z >= 1.0 - 1e-9 {
            break;
        }
        let bound = lower.a * z.powf(lower.gamma);
        let exact = psi(&loss, z).map_err(runtime)?;
        let numeric = psi_numeric(&loss, z).map_err(runtime)?;
        println!("{},{},{},{}", sig6(z), sig6(exact), sig6(numeric), sig6(bound));
        i += 1;
    }
    Ok(ExitCode::SUCCESS)
}

/// The worked example used when no constants are configured.
fn default_theory() -> TheoryConstants {
    TheoryConstants {
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
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetFile {
    #[serde(default = "default_theory")]
    theory: TheoryConstants,
    #[serde(default)]
    epsilon: Option<f64>,
}

fn budget_settings(common: &Common, epsilon: Option<f64>) -> Result<(TheoryConstants, f64), CliError> {
    let table: Table = load_table(common.config.as_deref())?;
    let (theory, file_eps) = if table.contains_key("model") {
        let cfg: ExperimentConfig = resolve(table, &common.set, None)?;
        let theory = cfg.theory.ok_or_else(|| usage("config has no [theory] section"))?;
        (theory, cfg.epsilons.last().copied())
    } else {
        let f: BudgetFile = resolve(table, &common.set, None)?;
        (f.theory, f.epsilon)
    };
    theory.validate().map_err(usage)?;
    let eps = epsilon.or(file_eps).unwrap_or(0.1);
    if !(eps > 0.0 && eps < 2.0) {
        return Err(usage(format!("epsilon must lie in (0, 2), got {eps}")));
    }
    Ok((theory, eps))
}

pub fn budget(common: &Common, epsilon: Option<f64>) -> Result<ExitCode, CliError> {
    let (t, eps) = budget_settings(common, epsilon)?;
    let kappa0 = kappa_threshold(t.gamma).map_err(usage)?;
    println!("kappa_0 = {} (gamma = {})", sig6(kappa0), sig6(t.gamma));
    if t.kappa <= kappa0 {
        println!("kappa = {} ≤ kappa_0: the convex update's total label count grows logarithmically", sig6(t.kappa));
    } else {
        println!("kappa = {} > kappa_0: the convex update's total label count grows polynomially", sig6(t.kappa));
    }

    let mut rows = Vec::new();
    for k in 1..=t.m {
        rows.push(vec![
            k.to_string(),
            sig6(radius(k).map_err(usage)?),
            nk_nonconvex(k, &t).map_err(usage)?.to_string(),
            nk_convex(k, &t).map_err(usage)?.to_string(),
        ]);
    }
    print!("{}", table(&["k", "r_k", "nk_nonconvex", "nk_convex"], &rows));

    println!("epsilon = {} (m = {})", sig6(eps), epochs_for(eps).map_err(usage)?);
    for (name, alpha, n0) in [
        ("0-1", t.alpha_nonconvex(), t.n0_nonconvex().map_err(usage)?),
        ("convex", t.alpha_convex(), t.n0_convex().map_err(usage)?),
    ] {
        let bound = total_label_bound(alpha, eps, n0).map_err(usage)?;
        let branch = if alpha > 0.0 { "power" } else { "log" };
        println!(
            "total_label_bound[{name}] = {} (alpha = {}, n0 = {}, {branch} branch)",
            sig6(bound),
            sig6(alpha),
            sig6(n0)
        );
    }
    Ok(ExitCode::SUCCESS)
}
