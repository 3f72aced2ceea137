use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::HarnessError;
use crate::data::{DataModel, EstimateMode, LabeledExample, Marginal};
use crate::losses::{Loss, SurrogateLoss};
use crate::rng::{RngStream, SeedTree};
use crate::scalar::{dot, norm};

fn unit_direction(d: usize, rng: &mut RngStream) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&g);
        if n > 1e-12 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// `count` points in `B(center, r)`: the first half on the boundary sphere,
/// the rest uniform in the ball.
fn sample_candidates(center: &[f64], r: f64, count: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
    let d = center.len();
    (0..count)
        .map(|i| {
            let u = unit_direction(d, rng);
            let rho = if i < count / 2 {
                r
            } else {
                r * rng.random::<f64>().powf(1.0 / d as f64)
            };
            center.iter().zip(&u).map(|(c, v)| c + rho * v).collect()
        })
        .collect()
}

fn empirical_risk(loss: Loss, w: &[f64], data: &[LabeledExample<f64>]) -> f64 {
    let total: f64 = data
        .iter()
        .map(|ex| SurrogateLoss::<f64>::phi(&loss, ex.sign() * dot(w, &ex.x)))
        .sum();
    total / data.len() as f64
}

/// Trial-mean of `sup |(L(w) − L(w*)) − (L̂(w) − L̂(w*))|` over
/// `‖w − w*‖ ≤ r`, for each radius, where `w*` is the surrogate minimizer.
///
/// The supremum is approximated over `candidates` sampled points per radius.
/// The candidate set of a radius also contains those of every smaller radius,
/// so on each trial the approximate supremum is non-decreasing in `r`. The
/// expected risk comes from circle quadrature when the marginal is the unit
/// circle and otherwise from one reference sample of `100·n` draws.
pub fn empirical_process_gaps(
    loss: Loss,
    model: &DataModel<f64>,
    radii: &[f64],
    n: usize,
    trials: usize,
    candidates: usize,
    tree: &SeedTree,
) -> Result<Vec<f64>, HarnessError> {
    if n == 0 || trials == 0 {
        return Err(HarnessError::Config("the gap experiment needs n ≥ 1 and trials ≥ 1".into()));
    }
    if let Some(bad) = radii.iter().find(|&&r| !(r >= 0.0 && r.is_finite())) {
        return Err(HarnessError::Config(format!("radius must be non-negative, got {bad}")));
    }
    let w_star = model.surrogate_optimum(loss)?;
    let exact = model.marginal() == Marginal::UniformSphere && model.dim() == 2;

    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    // pool[j] holds the candidates of the j-th smallest radius and below
    let mut rng = tree.stream("candidates", 0);
    let mut pool: Vec<Vec<f64>> = Vec::new();
    let mut cut = Vec::with_capacity(order.len());
    for &j in &order {
        pool.extend(sample_candidates(&w_star, radii[j], candidates, &mut rng));
        cut.push(pool.len());
    }

    let reference_risk = |w: &[f64]| -> Result<f64, HarnessError> {
        let mode = if exact {
            EstimateMode::Exact
        } else {
            EstimateMode::MonteCarlo(100 * n)
        };
        // a shared reference stream gives common random numbers across w
        let mut rng = tree.stream("reference", 0);
        Ok(model.expected_surrogate_risk(loss, w, mode, &mut rng)?.mean)
    };
    let star_risk = reference_risk(&w_star)?;
    let excess: Vec<f64> = pool
        .par_iter()
        .map(|w| reference_risk(w).map(|v| v - star_risk))
        .collect::<Result<_, _>>()?;

    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree.stream("trial", t as u64);
            let data = (0..n)
                .map(|_| model.label_oracle(model.sample_instance(&mut rng), &mut rng))
                .collect::<Result<Vec<_>, _>>()?;
            let star_hat = empirical_risk(loss, &w_star, &data);
            let dev: Vec<f64> = pool
                .iter()
                .zip(&excess)
                .map(|(w, ex)| (ex - (empirical_risk(loss, w, &data) - star_hat)).abs())
                .collect();
            let mut sups = Vec::with_capacity(cut.len());
            let mut running = 0.0f64;
            let mut start = 0;
            for &end in &cut {
                running = dev[start..end].iter().copied().fold(running, f64::max);
                sups.push(running);
                start = end;
            }
            debug_assert!(sups.windows(2).all(|p| p[0] <= p[1]));
            Ok(sups)
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut out = vec![0.0; radii.len()];
    for (rank, &j) in order.iter().enumerate() {
        out[j] = per_trial.iter().map(|s| s[rank]).sum::<f64>() / trials as f64;
    }
    Ok(out)
}

/// [`empirical_process_gaps`] at a single radius.
pub fn empirical_process_gap(
    loss: Loss,
    model: &DataModel<f64>,
    r: f64,
    n: usize,
    trials: usize,
    candidates: usize,
    tree: &SeedTree,
) -> Result<f64, HarnessError> {
    Ok(empirical_process_gaps(loss, model, &[r], n, trials, candidates, tree)?[0])
}
