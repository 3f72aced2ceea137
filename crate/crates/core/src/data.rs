//! Synthetic joint distributions over `(x, y)` and Monte Carlo / quadrature
//! estimators of risks, disagreement probabilities, the noise exponent and the
//! disagreement coefficient.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, dis_region_test, normalize, GeometryError, MarginalSymmetry, UnitVector};
use crate::losses::{Loss, SurrogateLoss};
use crate::rng::RngStream;
use crate::scalar::{dot, norm, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("affine conditional needs w*·x in [-1/2, 1/2], got {0}")]
    AffineOutOfRange(f64),
    #[error("τ is not linear for loss `{loss}` with the {conditional} conditional")]
    AssumptionIIViolation { loss: String, conditional: String },
    #[error("exact computation unsupported: {0}")]
    ExactUnsupported(String),
    #[error("invalid estimator input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Simpson panels used by the circle integrator.
pub const CIRCLE_PANELS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marginal {
    UniformSphere,
    Gaussian,
    UniformBall,
}

impl Marginal {
    /// All three marginals are orthogonally invariant.
    pub fn symmetry(&self) -> MarginalSymmetry {
        MarginalSymmetry::RotationInvariant
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Marginal::UniformSphere => "uniform-sphere",
            Marginal::Gaussian => "gaussian",
            Marginal::UniformBall => "uniform-ball",
        }
    }
}

/// `η(x) = Pr(Y = 1 | X = x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Conditional<T> {
    /// `1/(1 + exp(−s·w*·x))`.
    Logistic { scale: T },
    /// `w*·x + 1/2`.
    Affine,
    /// `½(1 + sgn(m)·min(1, |m/τ₀|)^{κ−1})` with `m = w̄*·x̄`.
    PoweredMargin { kappa: T, clamp: T },
}

impl<T: Scalar> Conditional<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Conditional::Logistic { .. } => "logistic",
            Conditional::Affine => "affine",
            Conditional::PoweredMargin { .. } => "powered-margin",
        }
    }
}

fn sgn<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Labelled instance with `y ∈ {−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledExample<T> {
    pub x: Vec<T>,
    pub y: i8,
}

impl<T: Scalar> LabeledExample<T> {
    pub fn new(x: Vec<T>, y: i8) -> Result<Self> {
        if y != 1 && y != -1 {
            return Err(ModelError::InvalidInput(format!("label must be ±1, got {y}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidInput("instance has non-finite coordinates".into()));
        }
        Ok(Self { x, y })
    }

    pub fn sign(&self) -> T {
        if self.y > 0 {
            T::one()
        } else {
            -T::one()
        }
    }
}

/// Point estimate with its Monte Carlo standard error (0 for exact values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_mc: usize,
}

impl RiskEstimate {
    pub fn exact(mean: f64) -> Self {
        Self {
            mean,
            std_error: 0.0,
            n_mc: 1,
        }
    }

    /// Mean and standard error of Bernoulli outcomes.
    pub fn from_hits(hits: usize, n: usize) -> Self {
        let p = hits as f64 / n as f64;
        Self {
            mean: p,
            std_error: (p * (1.0 - p) / n as f64).sqrt(),
            n_mc: n,
        }
    }
}

/// Exact quadrature or a Monte Carlo sample of the given size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMode {
    Exact,
    MonteCarlo(usize),
}

/// Joint distribution of `(X, Y)` with a linear Bayes boundary through the
/// origin, normal `w̄*`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataModel<T> {
    marginal: Marginal,
    conditional: Conditional<T>,
    w_star: Vec<T>,
    direction: UnitVector<T>,
    norm: T,
}

impl<T: Scalar> DataModel<T> {
    pub fn new(marginal: Marginal, conditional: Conditional<T>, w_star: Vec<T>) -> Result<Self> {
        let direction = normalize(&w_star)?;
        let norm = norm(&w_star);
        match conditional {
            Conditional::Logistic { scale } if !(scale > T::zero() && scale.is_finite()) => {
                return Err(ModelError::InvalidModel(format!("logistic scale must be positive, got {scale}")));
            }
            Conditional::Affine => {
                if marginal == Marginal::Gaussian {
                    return Err(ModelError::InvalidModel(
                        "affine conditional needs a bounded marginal (w*·x unbounded under a Gaussian)".into(),
                    ));
                }
                if norm > T::of(0.5) {
                    return Err(ModelError::InvalidModel(format!(
                        "affine conditional needs ‖w*‖ ≤ 1/2 on the unit ball, got {norm}"
                    )));
                }
            }
            Conditional::PoweredMargin { kappa, clamp } => {
                if !(kappa >= T::one() && kappa.is_finite()) {
                    return Err(ModelError::InvalidModel(format!("powered-margin κ must be ≥ 1, got {kappa}")));
                }
                if !(clamp > T::zero() && clamp <= T::one()) {
                    return Err(ModelError::InvalidModel(format!("powered-margin τ₀ must lie in (0, 1], got {clamp}")));
                }
            }
            _ => {}
        }
        Ok(Self {
            marginal,
            conditional,
            w_star,
            direction,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.w_star.len()
    }

    pub fn marginal(&self) -> Marginal {
        self.marginal
    }

    pub fn conditional(&self) -> Conditional<T> {
        self.conditional
    }

    pub fn w_star(&self) -> &[T] {
        &self.w_star
    }

    /// `w̄*`.
    pub fn direction(&self) -> &UnitVector<T> {
        &self.direction
    }

    /// `R = ‖w*‖`.
    pub fn norm(&self) -> T {
        self.norm
    }

    /// Nominal noise exponent of the conditional, when it has one.
    pub fn nominal_kappa(&self) -> Option<T> {
        match self.conditional {
            Conditional::PoweredMargin { kappa, .. } => Some(kappa),
            _ => None,
        }
    }

    pub fn sample_instance<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let d = self.dim();
        let gauss = |rng: &mut R| -> Vec<f64> { (0..d).map(|_| rng.sample(StandardNormal)).collect() };
        let v: Vec<f64> = match self.marginal {
            Marginal::Gaussian => gauss(rng),
            Marginal::UniformSphere | Marginal::UniformBall => loop {
                let g = gauss(rng);
                let n = g.iter().map(|c| c * c).sum::<f64>().sqrt();
                if n > 0.0 {
                    let scale = match self.marginal {
                        Marginal::UniformBall => rng.random::<f64>().powf(1.0 / d as f64) / n,
                        _ => 1.0 / n,
                    };
                    break g.into_iter().map(|c| c * scale).collect();
                }
            },
        };
        v.into_iter().map(T::of).collect()
    }

    /// `n` i.i.d. draws from the marginal.
    pub fn sample_unlabeled<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<T>> {
        (0..n).map(|_| self.sample_instance(rng)).collect()
    }

    /// `η(x)`.
    pub fn eta(&self, x: &[T]) -> Result<T> {
        geometry::check_dims(x.len(), self.dim())?;
        let half = T::of(0.5);
        match self.conditional {
            Conditional::Logistic { scale } => {
                let m = scale * dot(&self.w_star, x);
                Ok(T::one() / (T::one() + (-m).exp()))
            }
            Conditional::Affine => {
                let m = dot(&self.w_star, x);
                if m.abs() > half + T::of(1e-12) {
                    return Err(ModelError::AffineOutOfRange(m.to_f64_lossy()));
                }
                Ok((m + half).max(T::zero()).min(T::one()))
            }
            Conditional::PoweredMargin { kappa, clamp } => {
                let nx = norm(x);
                if nx <= T::zero() {
                    return Ok(half);
                }
                let m = dot(self.direction.as_slice(), x) / nx;
                Ok(powered_margin_eta(m, kappa, clamp))
            }
        }
    }

    /// Draws `y` with `Pr(y = +1) = η(x)`.
    pub fn label_oracle<R: Rng + ?Sized>(&self, x: Vec<T>, rng: &mut R) -> Result<LabeledExample<T>> {
        let eta = self.eta(&x)?.to_f64_lossy();
        let y = if rng.random::<f64>() < eta { 1 } else { -1 };
        LabeledExample::new(x, y)
    }

    /// Coefficients of the linear Bayes surrogate minimizer `τ(x) = w_φ·x`,
    /// for the two pairings where `τ` is linear.
    pub fn surrogate_optimum(&self, loss: Loss) -> Result<Vec<T>> {
        match (loss, self.conditional) {
            (Loss::Exponential, Conditional::Logistic { scale }) => {
                Ok(crate::scalar::scaled(&self.w_star, scale / T::of(2.0)))
            }
            (Loss::TruncatedQuadratic, Conditional::Affine) => {
                Ok(crate::scalar::scaled(&self.w_star, T::of(2.0)))
            }
            (loss, conditional) => Err(ModelError::AssumptionIIViolation {
                loss: loss.to_string(),
                conditional: conditional.name().to_string(),
            }),
        }
    }

    /// `τ(x) = argmin_z η(x)φ(z) + (1 − η(x))φ(−z)`, for linear pairings only.
    pub fn bayes_tau(&self, loss: Loss, x: &[T]) -> Result<T> {
        geometry::check_dims(x.len(), self.dim())?;
        let w = self.surrogate_optimum(loss)?;
        if let Conditional::Affine = self.conditional {
            // τ = 2η − 1, which requires η to be a valid probability.
            self.eta(x)?;
        }
        Ok(dot(&w, x))
    }

    /// Surrogate risk `E[φ(y·w·x)]` at an unnormalized `w`.
    ///
    /// Exact mode needs the uniform circle, since `φ` sees the length of `x`.
    pub fn expected_surrogate_risk(
        &self,
        loss: Loss,
        w: &[T],
        mode: EstimateMode,
        rng: &mut RngStream,
    ) -> Result<RiskEstimate> {
        geometry::check_dims(w.len(), self.dim())?;
        match mode {
            EstimateMode::Exact => {
                if self.marginal != Marginal::UniformSphere {
                    return Err(ModelError::ExactUnsupported(format!(
                        "surrogate risk under the {} marginal",
                        self.marginal.as_str()
                    )));
                }
                let rho = norm(w).to_f64_lossy();
                let a = w[1].atan2(w[0]).to_f64_lossy();
                let mut breaks = Vec::new();
                if rho > 1.0 {
                    // the hinge of the truncated quadratic sits at w·x = ±1
                    let c = (1.0 / rho).acos();
                    breaks.extend([a + c, a - c, a + std::f64::consts::PI - c, a - std::f64::consts::PI + c]);
                }
                let v = self.circle_expectation(&breaks, |x, eta| {
                    let z = dot(w, x);
                    eta * SurrogateLoss::<T>::phi(&loss, z) + (T::one() - eta) * SurrogateLoss::<T>::phi(&loss, -z)
                })?;
                Ok(RiskEstimate::exact(v.to_f64_lossy()))
            }
            EstimateMode::MonteCarlo(n) => {
                if n < 100 {
                    return Err(ModelError::InvalidInput(format!("need at least 100 Monte Carlo draws, got {n}")));
                }
                let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
                for _ in 0..n {
                    let ex = self.label_oracle(self.sample_instance(rng), rng)?;
                    let v = SurrogateLoss::<T>::phi(&loss, ex.sign() * dot(w, &ex.x)).to_f64_lossy();
                    sum += v;
                    sum_sq += v * v;
                }
                let mean = sum / n as f64;
                let var = (sum_sq / n as f64 - mean * mean).max(0.0);
                Ok(RiskEstimate {
                    mean,
                    std_error: (var / n as f64).sqrt(),
                    n_mc: n,
                })
            }
        }
    }

    /// Whether exact circle quadrature applies: `d = 2` and `η` is a function
    /// of the direction of `x` alone (or the marginal lives on the circle).
    pub fn supports_exact(&self) -> bool {
        self.dim() == 2
            && (self.marginal == Marginal::UniformSphere
                || matches!(self.conditional, Conditional::PoweredMargin { .. }))
    }

    fn require_exact(&self) -> Result<()> {
        if self.supports_exact() {
            Ok(())
        } else {
            Err(ModelError::ExactUnsupported(format!(
                "d = {} with the {} marginal and {} conditional",
                self.dim(),
                self.marginal.as_str(),
                self.conditional.name()
            )))
        }
    }

    /// Angles where the integrand of a circle integral involving `η` may kink.
    fn eta_breakpoints(&self) -> Vec<f64> {
        let a = self.direction.polar_angle().to_f64_lossy();
        let mut pts = vec![a + std::f64::consts::FRAC_PI_2, a - std::f64::consts::FRAC_PI_2];
        if let Conditional::PoweredMargin { clamp, .. } = self.conditional {
            let c = clamp.to_f64_lossy().acos();
            pts.extend([a + c, a - c, a + std::f64::consts::PI - c, a - std::f64::consts::PI + c]);
        }
        pts
    }

    /// Exact circle average `(1/2π)∫ g(x(t), η(x(t))) dt`.
    fn circle_expectation(&self, extra_breaks: &[f64], g: impl Fn(&[T], T) -> T) -> Result<T> {
        self.require_exact()?;
        let mut breaks = self.eta_breakpoints();
        breaks.extend_from_slice(extra_breaks);
        let val = circle_average(
            |t| {
                let x = [T::of(t.cos()), T::of(t.sin())];
                let eta = self.eta(&x).expect("circle point within the model support");
                g(&x, eta).to_f64_lossy()
            },
            &breaks,
            CIRCLE_PANELS,
        );
        Ok(T::of(val))
    }

    /// Binary risk `ℓ_b(w) = E[1(y·w·x ≤ 0)]`.
    pub fn estimate_binary_risk(&self, w: &UnitVector<T>, mode: EstimateMode, rng: &mut RngStream) -> Result<RiskEstimate> {
        geometry::check_dims(w.dim(), self.dim())?;
        match mode {
            EstimateMode::Exact => {
                let a = w.polar_angle().to_f64_lossy();
                let breaks = [a + std::f64::consts::FRAC_PI_2, a - std::f64::consts::FRAC_PI_2];
                let v = self.circle_expectation(&breaks, |x, eta| {
                    if dot(w.as_slice(), x) > T::zero() {
                        T::one() - eta
                    } else {
                        eta
                    }
                })?;
                Ok(RiskEstimate::exact(v.to_f64_lossy()))
            }
            EstimateMode::MonteCarlo(n) => {
                if n < 100 {
                    return Err(ModelError::InvalidInput(format!("need at least 100 Monte Carlo draws, got {n}")));
                }
                let mut hits = 0usize;
                for _ in 0..n {
                    let ex = self.label_oracle(self.sample_instance(rng), rng)?;
                    if ex.sign() * dot(w.as_slice(), &ex.x) <= T::zero() {
                        hits += 1;
                    }
                }
                Ok(RiskEstimate::from_hits(hits, n))
            }
        }
    }

    /// `ℓ_b(w) − ℓ_b(w̄*)`; in Monte Carlo mode both risks share one sample.
    pub fn excess_binary_risk(&self, w: &UnitVector<T>, mode: EstimateMode, rng: &mut RngStream) -> Result<RiskEstimate> {
        geometry::check_dims(w.dim(), self.dim())?;
        match mode {
            EstimateMode::Exact => {
                let a = w.polar_angle().to_f64_lossy();
                let breaks = [a + std::f64::consts::FRAC_PI_2, a - std::f64::consts::FRAC_PI_2];
                let star = self.direction.as_slice();
                // (2η − 1)·[sgn(w*·x) − sgn(w·x)]/2 pointwise
                let v = self.circle_expectation(&breaks, |x, eta| {
                    let s_w = sgn(dot(w.as_slice(), x));
                    let s_star = sgn(dot(star, x));
                    (T::of(2.0) * eta - T::one()) * (s_star - s_w) / T::of(2.0)
                })?;
                Ok(RiskEstimate::exact(v.to_f64_lossy()))
            }
            EstimateMode::MonteCarlo(n) => {
                if n < 100 {
                    return Err(ModelError::InvalidInput(format!("need at least 100 Monte Carlo draws, got {n}")));
                }
                let star = self.direction.as_slice();
                let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
                for _ in 0..n {
                    let ex = self.label_oracle(self.sample_instance(rng), rng)?;
                    let err = |v: &[T]| f64::from(u8::from(ex.sign() * dot(v, &ex.x) <= T::zero()));
                    let diff = err(w.as_slice()) - err(star);
                    sum += diff;
                    sum_sq += diff * diff;
                }
                let mean = sum / n as f64;
                let var = (sum_sq / n as f64 - mean * mean).max(0.0);
                Ok(RiskEstimate {
                    mean,
                    std_error: (var / n as f64).sqrt(),
                    n_mc: n,
                })
            }
        }
    }

    /// `Pr{sgn(u·X) ≠ sgn(v·X)}`; exact mode uses `θ(u, v)/π`.
    pub fn disagreement_probability(
        &self,
        u: &UnitVector<T>,
        v: &UnitVector<T>,
        mode: EstimateMode,
        rng: &mut RngStream,
    ) -> Result<RiskEstimate> {
        geometry::check_dims(u.dim(), self.dim())?;
        geometry::check_dims(v.dim(), self.dim())?;
        match mode {
            EstimateMode::Exact => {
                if self.marginal.symmetry() != MarginalSymmetry::RotationInvariant {
                    return Err(ModelError::ExactUnsupported("marginal is not rotation invariant".into()));
                }
                let theta = geometry::angle(u, v)?.to_f64_lossy();
                Ok(RiskEstimate::exact(theta / std::f64::consts::PI))
            }
            EstimateMode::MonteCarlo(n) => {
                if n == 0 {
                    return Err(ModelError::InvalidInput("need at least one Monte Carlo draw".into()));
                }
                let hits = (0..n)
                    .filter(|_| {
                        let x = self.sample_instance(rng);
                        sgn(dot(u.as_slice(), &x)) != sgn(dot(v.as_slice(), &x))
                    })
                    .count();
                Ok(RiskEstimate::from_hits(hits, n))
            }
        }
    }

    /// A fixed unit direction orthogonal to `w̄*` (helper for rotations).
    pub fn orthogonal_direction(&self) -> Result<UnitVector<T>> {
        let star = self.direction.as_slice();
        let (i, _) = star
            .iter()
            .enumerate()
            .fold((0, T::infinity()), |best, (i, &c)| if c.abs() < best.1 { (i, c.abs()) } else { best });
        let mut e = vec![T::zero(); self.dim()];
        e[i] = T::one();
        Ok(geometry::rotate_toward(&self.direction, &e, T::FRAC_PI_2())?)
    }

    /// Fits `log D(θ) = log μ + (1/κ)·log E(θ)` over hypotheses rotated from
    /// `w̄*` by each grid angle, where `D` is the disagreement probability and
    /// `E` the binary excess risk.
    pub fn verify_tsybakov_exponent(&self, theta_grid: &[T], mode: EstimateMode, rng: &mut RngStream) -> Result<TsybakovFit> {
        let helper = self.orthogonal_direction()?;
        let mut points = Vec::new();
        let mut dropped = Vec::new();
        for &theta in theta_grid {
            if !(theta > T::zero() && theta <= T::FRAC_PI_4() * T::of(1.0 + 1e-12)) {
                return Err(ModelError::InvalidInput(format!("grid angle {theta} outside (0, π/4]")));
            }
            let w = geometry::rotate_toward(&self.direction, helper.as_slice(), theta)?;
            let dis = self.disagreement_probability(&w, &self.direction, mode, rng)?;
            let excess = self.excess_binary_risk(&w, mode, rng)?;
            if excess.mean <= 0.0 || dis.mean <= 0.0 {
                log::warn!("dropping θ = {theta}: excess risk {} not positive", excess.mean);
                dropped.push(theta.to_f64_lossy());
                continue;
            }
            points.push(TsybakovPoint {
                theta: theta.to_f64_lossy(),
                disagreement: dis.mean,
                excess_risk: excess.mean,
            });
        }
        if points.len() < 2 {
            return Err(ModelError::InvalidInput("fewer than two usable grid points".into()));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.excess_risk.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.disagreement.ln()).collect();
        let fit = LinearFit::least_squares(&xs, &ys);
        Ok(TsybakovFit {
            kappa_hat: 1.0 / fit.slope,
            mu_hat: fit.intercept.exp(),
            r_squared: fit.r_squared,
            points,
            dropped,
        })
    }

    /// `θ̂(ε) = max_{r ∈ grid} P̂r(DIS(B(w, r)))/r`.
    pub fn estimate_disagreement_coefficient(
        &self,
        w: &UnitVector<T>,
        epsilon: T,
        r_grid: &[T],
        n_mc: usize,
        rng: &mut RngStream,
    ) -> Result<DisagreementCoefficient> {
        if !(epsilon > T::zero()) {
            return Err(ModelError::InvalidInput(format!("ε must be positive, got {epsilon}")));
        }
        if n_mc == 0 || r_grid.is_empty() {
            return Err(ModelError::InvalidInput("need a non-empty radius grid and n_mc ≥ 1".into()));
        }
        let mut per_radius = Vec::with_capacity(r_grid.len());
        for &r in r_grid {
            if r < epsilon || r > T::one() {
                return Err(ModelError::InvalidInput(format!("radius {r} outside [ε, 1]")));
            }
            let mut hits = 0usize;
            for _ in 0..n_mc {
                let x = self.sample_instance(rng);
                if dis_region_test(&x, w, r, self.marginal.symmetry())? {
                    hits += 1;
                }
            }
            let est = RiskEstimate::from_hits(hits, n_mc);
            per_radius.push((r.to_f64_lossy(), est));
        }
        let theta_hat = per_radius
            .iter()
            .map(|(r, e)| e.mean / r)
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(DisagreementCoefficient { theta_hat, per_radius })
    }
}

/// `η` of the powered-margin family at normalized margin `m`.
pub fn powered_margin_eta<T: Scalar>(m: T, kappa: T, clamp: T) -> T {
    let half = T::of(0.5);
    let mag = (m / clamp).abs().min(T::one());
    half * (T::one() + sgn(m) * mag.powf(kappa - T::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsybakovPoint {
    pub theta: f64,
    pub disagreement: f64,
    pub excess_risk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TsybakovFit {
    pub kappa_hat: f64,
    pub mu_hat: f64,
    pub r_squared: f64,
    pub points: Vec<TsybakovPoint>,
    /// Grid angles whose excess-risk estimate was not positive.
    pub dropped: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisagreementCoefficient {
    pub theta_hat: f64,
    pub per_radius: Vec<(f64, RiskEstimate)>,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl LinearFit {
    pub fn least_squares(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
        Self {
            slope,
            intercept,
            r_squared,
        }
    }
}

/// `(1/2π)∫₀^{2π} f(t) dt` by composite Simpson, split at `breakpoints`
/// (angles taken mod 2π) so that kinks and jumps fall on panel edges.
pub fn circle_average(f: impl Fn(f64) -> f64, breakpoints: &[f64], panels: usize) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut cuts: Vec<f64> = breakpoints.iter().map(|b| b.rem_euclid(tau)).collect();
    cuts.push(0.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    cuts.push(tau);
    let mut total = 0.0;
    for seg in cuts.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let mut n = ((panels as f64) * len / tau).ceil() as usize;
        n = n.max(2);
        if n % 2 == 1 {
            n += 1;
        }
        let h = len / n as f64;
        // Interior evaluation avoids the endpoint values of one-sided jumps.
        let eps = 1e-13 * tau;
        let ends = f(a + eps) + f(b - eps);
        let mut odd = 0.0;
        let mut even = 0.0;
        for i in 1..n {
            let v = f(a + i as f64 * h);
            if i % 2 == 1 {
                odd += v;
            } else {
                even += v;
            }
        }
        total += h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
    }
    total / tau
}
