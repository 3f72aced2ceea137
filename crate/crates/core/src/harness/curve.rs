use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{bootstrap, log_log_fit, quantile, BootstrapInterval, Summary};
use super::{ExperimentConfig, HarnessError};
use crate::data::{DataModel, LinearFit};
use crate::driver::{epochs_for, run_active_on_model, run_passive_on_model, RunRecord};

/// Labels needed for one accuracy target, active against passive.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub epsilon: f64,
    /// `m = ⌈log₂(2/ε)⌉`.
    pub epochs: usize,
    pub labels_active: Summary,
    /// Smallest `n_total` whose median (quartile) passive chord error is at
    /// most `ε`; the cap where the search gave up.
    pub labels_passive: Summary,
    /// The median search hit the cap.
    pub censored: bool,
    /// Final chord error of each active run, in seed order.
    pub active_errors: Vec<f64>,
    /// Passive chord errors at `labels_passive.median`, in seed order.
    pub passive_errors: Vec<f64>,
    pub active_records: Vec<RunRecord<f64>>,
}

/// The flat row written to `curve.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub epsilon: f64,
    pub labels_active_med: f64,
    pub labels_active_q1: f64,
    pub labels_active_q3: f64,
    pub labels_passive_med: f64,
    pub labels_passive_q1: f64,
    pub labels_passive_q3: f64,
    pub censored: bool,
}

impl CurvePoint {
    pub fn row(&self) -> CurveRow {
        CurveRow {
            epsilon: self.epsilon,
            labels_active_med: self.labels_active.median,
            labels_active_q1: self.labels_active.q1,
            labels_active_q3: self.labels_active.q3,
            labels_passive_med: self.labels_passive.median,
            labels_passive_q1: self.labels_passive.q1,
            labels_passive_q3: self.labels_passive.q3,
            censored: self.censored,
        }
    }
}

/// Curve points plus every passive probe, for resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
    /// `n_total` → passive chord error per seed (infinite for failed runs).
    pub passive_probes: BTreeMap<usize, Vec<f64>>,
}

struct PassiveProber<'a> {
    model: &'a DataModel<f64>,
    config: &'a ExperimentConfig,
    probes: BTreeMap<usize, Vec<f64>>,
}

impl PassiveProber<'_> {
    fn errors(&mut self, n: usize) -> &[f64] {
        if !self.probes.contains_key(&n) {
            let run = self.config.run_config(1);
            let errors: Vec<f64> = self
                .config
                .seeds
                .par_iter()
                .map(|&s| match run_passive_on_model(self.model, &run, n, self.config.run_seed(s)) {
                    Ok(rec) => rec
                        .final_chord_error(self.model.direction())
                        .expect("model and run share a dimension"),
                    Err(e) => {
                        log::warn!("passive run n = {n}, seed index {s} failed: {e}");
                        f64::INFINITY
                    }
                })
                .collect();
            self.probes.insert(n, errors);
        }
        &self.probes[&n]
    }

    /// Smallest `n ≤ cap` whose `q`-quantile chord error is at most `eps`,
    /// by doubling then bisection. The error need not be monotone in `n`, so
    /// this finds a crossing rather than the first one.
    fn smallest_n(&mut self, q: f64, eps: f64, cap: usize) -> Option<usize> {
        let ok = |p: &mut Self, n: usize| quantile(p.errors(n), q) <= eps;
        let mut lo = 0usize;
        let mut hi = 1usize;
        loop {
            if ok(self, hi) {
                break;
            }
            if hi >= cap {
                return None;
            }
            lo = hi;
            hi = (hi * 2).min(cap);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(self, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    }
}

/// Active labels against the passive baseline for each target in
/// `config.epsilons`.
pub fn label_complexity_curve(config: &ExperimentConfig) -> Result<Curve, HarnessError> {
    config.validate()?;
    config.require_seeds()?;
    config.require_epsilons()?;
    let model = config.model.build()?;
    let cap = config.passive.cap;
    let mut prober = PassiveProber {
        model: &model,
        config,
        probes: BTreeMap::new(),
    };
    let mut points = Vec::with_capacity(config.epsilons.len());
    for &epsilon in &config.epsilons {
        let epochs = epochs_for(epsilon)?;
        let active_records = if epochs == 0 {
            Vec::new()
        } else {
            let run = config.run_config(epochs);
            config
                .seeds
                .par_iter()
                .map(|&s| {
                    run_active_on_model(&model, &run, config.run_seed(s))
                        .map_err(|failure| HarnessError::Run { seed: s, failure })
                })
                .collect::<Result<Vec<_>, _>>()?
        };
        let (labels_active, active_errors) = if active_records.is_empty() {
            // r₁ = 2 already bounds the chord error of the initial guess
            (Summary::of(&[0.0]), Vec::new())
        } else {
            let labels: Vec<f64> = active_records.iter().map(|r| r.total_labels as f64).collect();
            let errors = active_records
                .iter()
                .map(|r| r.final_chord_error(model.direction()))
                .collect::<Result<Vec<_>, _>>()?;
            (Summary::of(&labels), errors)
        };

        let median_n = prober.smallest_n(0.5, epsilon, cap);
        let q1_n = prober.smallest_n(0.25, epsilon, cap);
        let q3_n = prober.smallest_n(0.75, epsilon, cap);
        let as_count = |n: Option<usize>| n.unwrap_or(cap) as f64;
        let passive_errors = prober.errors(median_n.unwrap_or(cap)).to_vec();
        points.push(CurvePoint {
            epsilon,
            epochs,
            labels_active,
            labels_passive: Summary {
                median: as_count(median_n),
                q1: as_count(q1_n),
                q3: as_count(q3_n),
            },
            censored: median_n.is_none(),
            active_errors,
            passive_errors,
            active_records,
        });
    }
    Ok(Curve {
        points,
        passive_probes: prober.probes,
    })
}

impl Curve {
    /// `labels ≈ a + b·log(1/ε)` over the active medians.
    pub fn active_log_fit(&self) -> LinearFit {
        let xs: Vec<f64> = self.points.iter().map(|p| (1.0 / p.epsilon).ln()).collect();
        let ys: Vec<f64> = self.points.iter().map(|p| p.labels_active.median).collect();
        LinearFit::least_squares(&xs, &ys)
    }

    /// Slope of `log n_passive` on `log(1/ε)` over uncensored points.
    pub fn passive_log_log_fit(&self) -> Option<LinearFit> {
        let pts: Vec<&CurvePoint> = self.points.iter().filter(|p| !p.censored).collect();
        if pts.len() < 2 {
            return None;
        }
        let xs: Vec<f64> = pts.iter().map(|p| 1.0 / p.epsilon).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.labels_passive.median).collect();
        Some(log_log_fit(&xs, &ys))
    }

    /// Bootstrap over seeds of the passive log-log slope.
    ///
    /// A resample reuses the probes already evaluated: its passive count for
    /// `ε` is the smallest probed `n` whose resampled median error is at most
    /// `ε`. Resamples that leave fewer than two targets reachable are dropped.
    pub fn passive_slope_interval(
        &self,
        resamples: usize,
        level: f64,
        rng: &mut crate::rng::RngStream,
    ) -> Option<BootstrapInterval> {
        let seeds = self.passive_probes.values().next()?.len();
        let targets: Vec<f64> = self.points.iter().filter(|p| !p.censored).map(|p| p.epsilon).collect();
        let probes = &self.passive_probes;
        bootstrap(seeds, resamples, level, rng, |idx| {
            let medians: Vec<(usize, f64)> = probes
                .iter()
                .map(|(&n, errs)| {
                    let pick: Vec<f64> = idx.iter().map(|&i| errs[i]).collect();
                    (n, quantile(&pick, 0.5))
                })
                .collect();
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for &eps in &targets {
                if let Some(&(n, _)) = medians.iter().find(|(_, m)| *m <= eps) {
                    xs.push(1.0 / eps);
                    ys.push(n as f64);
                }
            }
            (xs.len() >= 2).then(|| log_log_fit(&xs, &ys).slope)
        })
    }
}
