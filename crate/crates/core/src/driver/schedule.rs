//! Per-epoch label budgets: fixed and geometric schedules for experiments, and
//! the theory budgets of the two convergence analyses for checking formulas.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("schedule parameters inconsistent: {0}")]
    Inconsistent(String),
    #[error("epoch index must be ≥ 1")]
    ZeroEpoch,
    #[error("budget {0} is not representable as a label count")]
    Overflow(f64),
}

pub type Result<T, E = ScheduleError> = std::result::Result<T, E>;

/// Constants entering the theory budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConstants {
    pub mu: f64,
    pub kappa: f64,
    pub ell_minus: f64,
    pub ell_plus: f64,
    pub gamma_minus: f64,
    pub gamma_plus: f64,
    /// Disagreement coefficient `θ(ε)`.
    pub theta_eps: f64,
    pub delta: f64,
    pub d: usize,
    /// Number of epochs.
    pub m: usize,
    /// Lipschitz constant of the surrogate on the working margin range.
    #[serde(rename = "L")]
    pub lipschitz: f64,
    #[serde(rename = "R")]
    pub norm_bound: f64,
    pub a: f64,
    pub gamma: f64,
    #[serde(default)]
    pub floor_enabled: bool,
}

impl TheoryConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu", self.mu),
            ("kappa", self.kappa),
            ("ell_minus", self.ell_minus),
            ("ell_plus", self.ell_plus),
            ("gamma_minus", self.gamma_minus),
            ("gamma_plus", self.gamma_plus),
            ("theta_eps", self.theta_eps),
            ("L", self.lipschitz),
            ("R", self.norm_bound),
            ("a", self.a),
            ("gamma", self.gamma),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ScheduleError::Inconsistent(format!("{name} must be positive, got {v}")));
            }
        }
        if self.kappa < 1.0 {
            return Err(ScheduleError::Inconsistent(format!("κ must be ≥ 1, got {}", self.kappa)));
        }
        if self.gamma_minus < self.gamma_plus {
            return Err(ScheduleError::Inconsistent(format!(
                "need γ₋ ≥ γ₊, got {} < {}",
                self.gamma_minus, self.gamma_plus
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ScheduleError::Inconsistent(format!("δ must lie in (0, 1), got {}", self.delta)));
        }
        if self.d == 0 || self.m == 0 {
            return Err(ScheduleError::Inconsistent("d and m must be positive".into()));
        }
        Ok(())
    }

    /// `c = μ·ℓ₊^{1/κ}·2^{γ₀}/ℓ₋` with `γ₀ = 2 + γ₋ + γ₊/κ`.
    pub fn c_nonconvex(&self) -> f64 {
        let gamma0 = 2.0 + self.gamma_minus + self.gamma_plus / self.kappa;
        self.mu * self.ell_plus.powf(1.0 / self.kappa) * 2f64.powf(gamma0) / self.ell_minus
    }

    /// `α = γ₋ − γ₊/κ` of the 0-1 update analysis.
    pub fn alpha_nonconvex(&self) -> f64 {
        self.gamma_minus - self.gamma_plus / self.kappa
    }

    /// `γγ₋ − γγ₊/κ − 1` of the convex update analysis.
    pub fn alpha_convex(&self) -> f64 {
        self.gamma * self.gamma_minus - self.gamma * self.gamma_plus / self.kappa - 1.0
    }

    /// `μ·ℓ₊^{1/κ}·2^{γ₋+γ₊/κ}·θ(ε)/ℓ₋`.
    fn convex_base(&self) -> f64 {
        self.mu * self.ell_plus.powf(1.0 / self.kappa) * 2f64.powf(self.gamma_minus + self.gamma_plus / self.kappa)
            * self.theta_eps
            / self.ell_minus
    }

    /// `(2LR/a·(4 + √(2 log(m/δ))))²`.
    fn convex_factor(&self) -> Result<f64> {
        let l = log_checked(self.m as f64 / self.delta, "m/δ")?;
        let inner = 2.0 * self.lipschitz * self.norm_bound / self.a * (4.0 + (2.0 * l).sqrt());
        Ok(inner * inner)
    }

    /// `n₀` of the total-label bound for the 0-1 update.
    pub fn n0_nonconvex(&self) -> Result<f64> {
        let alpha = self.alpha_nonconvex();
        let ct = self.c_nonconvex() * self.theta_eps;
        let bracket = log_checked(4.0 * self.m as f64 / self.delta, "4m/δ")?
            + 2.0
                * (self.d as f64 + 1.0)
                * (8f64.ln() + 2.0 * log_checked(ct, "cθ(ε)")? + 2.0 * self.m as f64 * alpha * 2f64.ln());
        Ok(2f64.powf(1.0 - 4.0 * alpha) * ct * ct * bracket)
    }

    /// `n₀` of the total-label bound for the convex update.
    pub fn n0_convex(&self) -> Result<f64> {
        Ok(2f64.powf(-4.0 * self.alpha_convex())
            * self.convex_base().powf(2.0 * self.gamma)
            * self.convex_factor()?)
    }
}

fn log_checked(arg: f64, what: &str) -> Result<f64> {
    if arg > 0.0 && arg.is_finite() {
        Ok(arg.ln())
    } else {
        Err(ScheduleError::Inconsistent(format!("log argument {what} = {arg} is not positive")))
    }
}

fn to_count(v: f64) -> Result<usize> {
    if !(v.is_finite() && v >= 0.0 && v < 2f64.powi(53)) {
        return Err(ScheduleError::Overflow(v));
    }
    Ok(v.ceil() as usize)
}

/// `r_k = 2^{2−k}`.
pub fn radius(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(ScheduleError::ZeroEpoch);
    }
    Ok(2f64.powi(2 - k as i32))
}

pub fn nk_nonconvex(k: usize, s: &TheoryConstants) -> Result<usize> {
    s.validate()?;
    let r = radius(k)?;
    let c = s.c_nonconvex();
    let ct = c * s.theta_eps;
    let alpha = s.alpha_nonconvex();
    let bracket = log_checked(4.0 * s.m as f64 / s.delta, "4m/δ")?
        + 2.0 * (s.d as f64 + 1.0) * (8f64.ln() + 2.0 * log_checked(ct / r.powf(alpha), "cθ(ε)/r_k^α")?);
    if bracket <= 0.0 {
        return Err(ScheduleError::Inconsistent(format!("bracket {bracket} is not positive")));
    }
    to_count(2.0 * ct * ct * bracket * r.powf(-2.0 * alpha))
}

/// `⌈1 + 2 log(m/δ)·log((2/e)·log(m/δ))⌉`.
pub fn label_floor(m: usize, delta: f64) -> Result<usize> {
    let l = log_checked(m as f64 / delta, "m/δ")?;
    let inner = log_checked(2.0 / std::f64::consts::E * l, "(2/e)·log(m/δ)")?;
    to_count((1.0 + 2.0 * l * inner).max(0.0))
}

pub fn nk_convex(k: usize, s: &TheoryConstants) -> Result<usize> {
    s.validate()?;
    let r = radius(k)?;
    let exponent = 2.0 * (1.0 + s.gamma * s.gamma_plus / s.kappa - s.gamma * s.gamma_minus);
    let n = to_count(s.convex_base().powf(2.0 * s.gamma) * s.convex_factor()? * r.powf(exponent))?;
    if s.floor_enabled {
        Ok(n.max(label_floor(s.m, s.delta)?))
    } else {
        Ok(n)
    }
}

/// `κ₀ = (1 + √(1 + 4γ²))/(2γ)`.
pub fn kappa_threshold(gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ScheduleError::Inconsistent(format!("γ must be positive, got {gamma}")));
    }
    Ok((1.0 + (1.0 + 4.0 * gamma * gamma).sqrt()) / (2.0 * gamma))
}

/// Total labels over all epochs needed for accuracy `ε`.
pub fn total_label_bound(alpha: f64, epsilon: f64, n0: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 2.0) {
        return Err(ScheduleError::Inconsistent(format!("ε must lie in (0, 2), got {epsilon}")));
    }
    if !(n0 > 0.0) {
        return Err(ScheduleError::Inconsistent(format!("n0 must be positive, got {n0}")));
    }
    if alpha > 0.0 {
        let g = 2f64.powf(2.0 * alpha);
        Ok(n0 * g / (g - 1.0) * (4.0 / epsilon).powf(2.0 * alpha))
    } else {
        Ok(n0 * (4.0 / epsilon).log2())
    }
}

/// `m = ⌈log₂(2/ε)⌉`.
pub fn epochs_for(epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 2.0) {
        return Err(ScheduleError::Inconsistent(format!("ε must lie in (0, 2], got {epsilon}")));
    }
    Ok((2.0 / epsilon).log2().ceil().max(0.0) as usize)
}

/// How many labels epoch `k` collects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    Fixed { n: usize },
    /// `⌈n0·ratio^{k−1}⌉`.
    Geometric { n0: usize, ratio: f64 },
    TheoryNonconvex(TheoryConstants),
    TheoryConvex(TheoryConstants),
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match self {
            Schedule::Fixed { .. } => Ok(()),
            Schedule::Geometric { ratio, .. } if !(*ratio > 0.0 && ratio.is_finite()) => {
                Err(ScheduleError::Inconsistent(format!("geometric ratio must be positive, got {ratio}")))
            }
            Schedule::Geometric { .. } => Ok(()),
            Schedule::TheoryNonconvex(c) | Schedule::TheoryConvex(c) => c.validate(),
        }
    }

    pub fn budget(&self, k: usize) -> Result<usize> {
        if k == 0 {
            return Err(ScheduleError::ZeroEpoch);
        }
        match self {
            Schedule::Fixed { n } => Ok(*n),
            Schedule::Geometric { n0, ratio } => to_count(*n0 as f64 * ratio.powi(k as i32 - 1)),
            Schedule::TheoryNonconvex(c) => nk_nonconvex(k, c),
            Schedule::TheoryConvex(c) => nk_convex(k, c),
        }
    }
}
