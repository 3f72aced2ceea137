use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LinearFit;
use crate::rng::RngStream;

/// Quantile with linear interpolation between order statistics (the
/// "type 7" rule). Infinite values sort last and are returned as is.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    if lo == hi || frac == 0.0 || v[lo] == v[hi] {
        v[lo]
    } else if v[hi].is_infinite() {
        v[hi]
    } else {
        v[lo] + (v[hi] - v[lo]) * frac
    }
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Median and quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            median: quantile(values, 0.5),
            q1: quantile(values, 0.25),
            q3: quantile(values, 0.75),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.q1 <= v && v <= self.q3
    }
}

/// Point estimate of a statistic with a percentile bootstrap interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub resamples: usize,
}

/// Percentile bootstrap over `n` exchangeable units. `stat` receives the
/// resampled unit indices and may return `None` for a degenerate resample,
/// which is skipped.
pub fn bootstrap(
    n: usize,
    resamples: usize,
    level: f64,
    rng: &mut RngStream,
    stat: impl Fn(&[usize]) -> Option<f64>,
) -> Option<BootstrapInterval> {
    let all: Vec<usize> = (0..n).collect();
    let estimate = stat(&all)?;
    let mut draws = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; n];
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..n);
        }
        if let Some(v) = stat(&idx) {
            draws.push(v);
        }
    }
    if draws.is_empty() {
        return None;
    }
    let tail = (1.0 - level) / 2.0;
    Some(BootstrapInterval {
        estimate,
        lo: quantile(&draws, tail),
        hi: quantile(&draws, 1.0 - tail),
        resamples: draws.len(),
    })
}

/// Least-squares slope of `log y` on `log x`.
pub fn log_log_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    LinearFit::least_squares(&lx, &ly)
}
