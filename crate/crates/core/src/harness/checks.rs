use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gap::empirical_process_gaps;
use super::{CheckConfig, HarnessError};
use crate::data::{Conditional, DataModel, EstimateMode, LabeledExample, Marginal};
use crate::geometry::{angle, disagreement_exists_oracle, should_query, HypothesisBall, UnitVector};
use crate::losses::{psi, psi_numeric, Loss, SurrogateLoss};
use crate::rng::SeedTree;
use crate::scalar::{distance, norm};
use crate::solvers::{surrogate_gradient, surrogate_objective};

/// One line of `checks.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check_name: String,
    pub parameter: String,
    pub observed: f64,
    /// A number, or `lo..hi` for a band.
    pub bound_or_target: String,
    /// Monte Carlo standard error, 0 for deterministic checks.
    pub sigma: f64,
    pub pass: bool,
}

/// Suites run by [`run_checks`], in order.
pub const SUITES: [&str; 5] = ["equivalence", "psi", "lemma", "gradient", "gap"];

/// Runs the selected suites (all when `only` is empty).
pub fn run_checks(config: &CheckConfig, only: &[String], tree: &SeedTree) -> Result<Vec<CheckRow>, HarnessError> {
    if let Some(bad) = only.iter().find(|n| !SUITES.contains(&n.as_str())) {
        return Err(HarnessError::Config(format!(
            "unknown check `{bad}` (expected one of {})",
            SUITES.join(", ")
        )));
    }
    let wanted = |name: &str| only.is_empty() || only.iter().any(|n| n == name);
    let mut rows = Vec::new();
    if wanted("equivalence") {
        rows.extend(query_rule_equivalence(config, &tree.child("equivalence", 0))?);
    }
    if wanted("psi") {
        rows.extend(psi_checks(config.psi_tolerance)?);
    }
    if wanted("lemma") {
        let lemma = tree.child("lemma", 0);
        for (i, &d) in config.lemma_sphere_dims.iter().enumerate() {
            let model = marginal_only(Marginal::UniformSphere, d)?;
            rows.extend(lemma_bounds_report(
                &model,
                config.lemma_pairs,
                config.lemma_n_mc,
                config.lemma_c,
                &lemma.child("sphere", i as u64),
            )?);
        }
        let model = marginal_only(Marginal::Gaussian, config.lemma_gaussian_dim)?;
        rows.extend(lemma_bounds_report(
            &model,
            config.lemma_pairs,
            config.lemma_n_mc,
            config.lemma_c,
            &lemma.child("gaussian", 0),
        )?);
    }
    if wanted("gradient") {
        rows.extend(gradient_checks(
            config.gradient_triples,
            config.gradient_tolerance,
            &tree.child("gradient", 0),
        )?);
    }
    if wanted("gap") {
        rows.extend(gap_scaling(config, &tree.child("gap", 0))?);
    }
    Ok(rows)
}

/// A model used only for its marginal.
fn marginal_only(marginal: Marginal, d: usize) -> Result<DataModel<f64>, HarnessError> {
    let mut w = vec![0.0; d];
    if let Some(first) = w.first_mut() {
        *first = 1.0;
    }
    Ok(DataModel::new(
        marginal,
        Conditional::PoweredMargin { kappa: 1.0, clamp: 1.0 },
        w,
    )?)
}

/// The band test against the angular oracle on Gaussian `x` (not unit
/// length, so the normalization is exercised too).
pub fn query_rule_equivalence(config: &CheckConfig, tree: &SeedTree) -> Result<Vec<CheckRow>, HarnessError> {
    let cells: Vec<(usize, f64)> = config
        .equivalence_dims
        .iter()
        .flat_map(|&d| config.equivalence_radii.iter().map(move |&r| (d, r)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(i, &(d, r))| {
            let mut rng = tree.stream("cell", i as u64);
            let mut mismatches = 0usize;
            for _ in 0..config.equivalence_samples {
                let ball = HypothesisBall::new(UnitVector::random(d, &mut rng)?, r);
                let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                if should_query(&x, &ball)? != disagreement_exists_oracle(&x, &ball)? {
                    mismatches += 1;
                }
            }
            let n = config.equivalence_samples.max(1) as f64;
            Ok(CheckRow {
                check_name: "query-equivalence".into(),
                parameter: format!("d={d} r={r}"),
                observed: 1.0 - mismatches as f64 / n,
                bound_or_target: "1".into(),
                sigma: 0.0,
                pass: mismatches == 0,
            })
        })
        .collect()
}

/// `z = 0.05, 0.10, …, 0.95`.
pub fn psi_grid() -> Vec<f64> {
    (1..=19).map(|i| f64::from(i) * 0.05).collect()
}

/// Closed-form ψ against its numeric infimum, and `ψ(z) ≥ z²/2` for the
/// exponential loss.
pub fn psi_checks(tolerance: f64) -> Result<Vec<CheckRow>, HarnessError> {
    let mut rows = Vec::new();
    for loss in [Loss::Exponential, Loss::TruncatedQuadratic] {
        for z in psi_grid() {
            let closed = SurrogateLoss::<f64>::psi_closed(&loss, z)
                .ok_or_else(|| HarnessError::Config(format!("{loss} has no closed-form ψ")))?;
            let diff = (closed - psi_numeric(&loss, z)?).abs();
            rows.push(CheckRow {
                check_name: "psi-closed-vs-numeric".into(),
                parameter: format!("{loss} z={z}"),
                observed: diff,
                bound_or_target: tolerance.to_string(),
                sigma: 0.0,
                pass: diff <= tolerance,
            });
        }
    }
    for z in psi_grid() {
        let value = psi(&Loss::Exponential, z)?;
        let bound = z * z / 2.0;
        rows.push(CheckRow {
            check_name: "psi-lower-bound".into(),
            parameter: format!("exponential z={z}"),
            observed: value,
            bound_or_target: bound.to_string(),
            sigma: 0.0,
            pass: value >= bound,
        });
    }
    Ok(rows)
}

/// Disagreement between random hyperplane pairs against the angle between
/// them: `|p̂ − θ/π| ≤ 3σ` on the sphere, `c·θ ≤ p̂ + 3σ` under a Gaussian.
pub fn lemma_bounds_report(
    model: &DataModel<f64>,
    pair_count: usize,
    n_mc: usize,
    c: f64,
    tree: &SeedTree,
) -> Result<Vec<CheckRow>, HarnessError> {
    let d = model.dim();
    let marginal = model.marginal();
    if marginal == Marginal::UniformBall {
        return Err(HarnessError::Config("the lemma report covers the sphere and Gaussian marginals".into()));
    }
    (0..pair_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree.stream("pair", i as u64);
            let u = UnitVector::random(d, &mut rng)?;
            let v = UnitVector::random(d, &mut rng)?;
            let theta = angle(&u, &v)?;
            let est = model.disagreement_probability(&u, &v, EstimateMode::MonteCarlo(n_mc), &mut rng)?;
            let sigma = est.std_error;
            let parameter = format!("d={d} pair={i} theta={theta}");
            Ok(match marginal {
                Marginal::UniformSphere => {
                    let target = theta / std::f64::consts::PI;
                    CheckRow {
                        check_name: "sphere-identity".into(),
                        parameter,
                        observed: est.mean,
                        bound_or_target: target.to_string(),
                        sigma,
                        pass: (est.mean - target).abs() <= 3.0 * sigma,
                    }
                }
                _ => {
                    let bound = c * theta;
                    CheckRow {
                        check_name: "gaussian-lower-bound".into(),
                        parameter,
                        observed: est.mean,
                        bound_or_target: bound.to_string(),
                        sigma,
                        pass: bound <= est.mean + 3.0 * sigma,
                    }
                }
            })
        })
        .collect()
}

/// Analytic surrogate gradients against central differences on random
/// `(loss, w, data)` triples.
pub fn gradient_checks(triples: usize, tolerance: f64, tree: &SeedTree) -> Result<Vec<CheckRow>, HarnessError> {
    let h = 1e-6;
    (0..triples)
        .map(|i| {
            let mut rng = tree.stream("triple", i as u64);
            let loss = Loss::ALL[i % Loss::ALL.len()];
            let d = 2 + i % 4;
            let data = (0..30)
                .map(|_| {
                    let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let y = if rng.random::<bool>() { 1 } else { -1 };
                    LabeledExample::new(x, y)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let w: Vec<f64> = (0..d).map(|_| 0.5 * rng.sample::<f64, _>(StandardNormal)).collect();
            let g = surrogate_gradient(&loss, &w, &data)?;
            let mut fd = vec![0.0; d];
            for j in 0..d {
                let mut plus = w.clone();
                let mut minus = w.clone();
                plus[j] += h;
                minus[j] -= h;
                fd[j] = (surrogate_objective(&loss, &plus, &data)? - surrogate_objective(&loss, &minus, &data)?)
                    / (2.0 * h);
            }
            let rel = distance(&g, &fd) / norm(&g).max(1e-12);
            Ok(CheckRow {
                check_name: "gradient-finite-difference".into(),
                parameter: format!("{loss} d={d} triple={i}"),
                observed: rel,
                bound_or_target: tolerance.to_string(),
                sigma: 0.0,
                pass: rel <= tolerance,
            })
        })
        .collect()
}

/// Ratios `gap(r)/gap(r/2)` at fixed `n` and `gap(n)/gap(4n)` at `r/2`.
pub fn gap_scaling(config: &CheckConfig, tree: &SeedTree) -> Result<Vec<CheckRow>, HarnessError> {
    let g = &config.gap;
    let model = g.model()?;
    let half = g.radius / 2.0;
    let by_radius = empirical_process_gaps(g.loss, &model, &[g.radius, half], g.n, g.trials, g.candidates, tree)?;
    let larger_n = empirical_process_gaps(g.loss, &model, &[half], 4 * g.n, g.trials, g.candidates, tree)?;
    let band = format!("{}..{}", g.band[0], g.band[1]);
    let within = |v: f64| g.band[0] <= v && v <= g.band[1];
    let ratio_r = by_radius[0] / by_radius[1];
    let ratio_n = by_radius[1] / larger_n[0];
    Ok(vec![
        CheckRow {
            check_name: "gap-radius-ratio".into(),
            parameter: format!("n={} r={}/{}", g.n, g.radius, half),
            observed: ratio_r,
            bound_or_target: band.clone(),
            sigma: 0.0,
            pass: within(ratio_r),
        },
        CheckRow {
            check_name: "gap-sample-ratio".into(),
            parameter: format!("r={} n={}/{}", half, g.n, 4 * g.n),
            observed: ratio_n,
            bound_or_target: band,
            sigma: 0.0,
            pass: within(ratio_n),
        },
    ])
}
