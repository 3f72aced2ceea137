//! The epoch loop: scan the stream, query inside the disagreement band, solve
//! the epoch ERM, renormalize and halve the radius.

mod schedule;
mod stream;

pub use schedule::{
    epochs_for, kappa_threshold, label_floor, nk_convex, nk_nonconvex, radius, total_label_bound, Schedule,
    ScheduleError, TheoryConstants,
};
pub use stream::{AuditedOracle, InstanceStream, LabelOracle, ModelOracle, ModelStream, PoolStream};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataModel, EstimateMode, LabeledExample, ModelError};
use crate::geometry::{chord_length, normalize, should_query, GeometryError, HypothesisBall, UnitVector};
use crate::losses::Loss;
use crate::rng::SeedTree;
use crate::scalar::{norm, Scalar};
use crate::solvers::{
    erm_convex, erm_convex_in_ball, erm_zero_one_2d, erm_zero_one_search, ConvexSolution, ConvexSolverParams,
    SolverError, SurrogateBall,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("stream exhausted in epoch {epoch} after {labels} of {requested} labels")]
    StreamExhausted { epoch: usize, labels: usize, requested: usize },
    #[error("convex solution in epoch {epoch} has norm {norm:e}, cannot normalize")]
    DegenerateSolution { epoch: usize, norm: f64 },
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
}

/// A failed run together with the epochs completed before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure<T> {
    pub error: DriverError,
    pub partial: Box<RunRecord<T>>,
}

impl<T: fmt::Debug> fmt::Display for RunFailure<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} complete epochs)", self.error, self.partial.epochs.len())
    }
}

impl<T: fmt::Debug> std::error::Error for RunFailure<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Which empirical risk the epoch minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Update {
    /// 0-1 loss over the hypothesis arc; exact in `d = 2`, heuristic above.
    ZeroOne,
    /// Surrogate loss over the ball `Δ_k`.
    Convex { loss: Loss },
}

/// How the per-epoch excess risk column is filled when the model is known.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskReporting {
    None,
    /// Exact quadrature where available, otherwise omitted.
    #[default]
    Exact,
    MonteCarlo(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub update: Update,
    pub schedule: Schedule,
    pub epochs: usize,
    /// `R`, required by the convex update.
    pub norm_bound: Option<T>,
    pub solver: ConvexSolverParams,
    /// Random restarts of the 0-1 search in `d > 2`.
    pub restarts: usize,
    pub risk: RiskReporting,
}

impl<T: Scalar> RunConfig<T> {
    pub fn new(update: Update, schedule: Schedule, epochs: usize) -> Self {
        Self {
            update,
            schedule,
            epochs,
            norm_bound: None,
            solver: ConvexSolverParams::default(),
            restarts: 16,
            risk: RiskReporting::Exact,
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        if self.epochs == 0 {
            return Err(DriverError::InvalidConfig("m must be at least 1".into()));
        }
        self.schedule.validate()?;
        self.solver.validate()?;
        if let Update::Convex { .. } = self.update {
            match self.norm_bound {
                Some(r) if r > T::zero() && r.is_finite() => {}
                _ => return Err(DriverError::InvalidConfig("the convex update needs R > 0".into())),
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord<T> {
    pub k: usize,
    /// Hypothesis the epoch started from.
    pub w_k: UnitVector<T>,
    pub r_k: T,
    pub n_k: usize,
    pub labels: usize,
    pub scanned: usize,
    /// `‖w_k − w̄*‖` when the target is known.
    pub chord_error: Option<T>,
    /// Binary excess risk of `w_k`.
    pub excess_risk_est: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord<T> {
    pub epochs: Vec<EpochRecord<T>>,
    pub final_w: UnitVector<T>,
    pub total_labels: usize,
    pub seed: u64,
    pub config_digest: String,
}

#[derive(Serialize, Deserialize)]
struct EpochWire {
    k: usize,
    r_k: f64,
    n_k: usize,
    labels: usize,
    scanned: usize,
    chord_error: Option<f64>,
    excess_risk_est: Option<f64>,
}

/// On-disk form of a [`RunRecord`].
#[derive(Serialize, Deserialize)]
pub struct RunRecordWire {
    seed: u64,
    config_digest: String,
    epochs: Vec<EpochWire>,
    total_labels: usize,
    final_w: Vec<f64>,
}

impl<T: Scalar> RunRecord<T> {
    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.config_digest = digest.into();
        self
    }

    pub fn to_wire(&self) -> RunRecordWire {
        RunRecordWire {
            seed: self.seed,
            config_digest: self.config_digest.clone(),
            epochs: self
                .epochs
                .iter()
                .map(|e| EpochWire {
                    k: e.k,
                    r_k: e.r_k.to_f64_lossy(),
                    n_k: e.n_k,
                    labels: e.labels,
                    scanned: e.scanned,
                    chord_error: e.chord_error.map(|c| c.to_f64_lossy()),
                    excess_risk_est: e.excess_risk_est,
                })
                .collect(),
            total_labels: self.total_labels,
            final_w: self.final_w.as_slice().iter().map(|v| v.to_f64_lossy()).collect(),
        }
    }

    /// One compact JSON object, floats at full round-trip precision.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_wire()).expect("run records contain only finite numbers and strings")
    }

    /// `‖w_{m+1} − w̄*‖`.
    pub fn final_chord_error(&self, target: &UnitVector<T>) -> Result<T, GeometryError> {
        chord_length(&self.final_w, target)
    }

    /// Chord errors of `w_1, …, w_m, w_{m+1}` against `target`.
    pub fn chord_errors(&self, target: &UnitVector<T>) -> Result<Vec<T>, GeometryError> {
        let mut out = self
            .epochs
            .iter()
            .map(|e| chord_length(&e.w_k, target))
            .collect::<Result<Vec<_>, _>>()?;
        out.push(self.final_chord_error(target)?);
        Ok(out)
    }
}

/// Reference model for the error columns of the trace.
pub struct Truth<'a, T> {
    pub model: &'a DataModel<T>,
}

fn annotate<T: Scalar>(
    truth: Option<&Truth<'_, T>>,
    w: &UnitVector<T>,
    risk: RiskReporting,
    tree: &SeedTree,
    k: usize,
) -> Result<(Option<T>, Option<f64>), DriverError> {
    let Some(truth) = truth else {
        return Ok((None, None));
    };
    let chord = chord_length(w, truth.model.direction())?;
    let excess = match risk {
        RiskReporting::None => None,
        RiskReporting::Exact if truth.model.supports_exact() => Some(
            truth
                .model
                .excess_binary_risk(w, EstimateMode::Exact, &mut tree.stream("estimator", k as u64))?
                .mean,
        ),
        RiskReporting::Exact => None,
        RiskReporting::MonteCarlo(n) => Some(
            truth
                .model
                .excess_binary_risk(w, EstimateMode::MonteCarlo(n), &mut tree.stream("estimator", k as u64))?
                .mean,
        ),
    };
    Ok((Some(chord), excess))
}

fn convex_step<T: Scalar>(
    result: Result<ConvexSolution<T>, SolverError>,
    epoch: usize,
) -> Result<Vec<T>, DriverError> {
    match result {
        Ok(sol) => Ok(sol.w),
        Err(SolverError::MaxItersExceeded {
            best,
            residual,
            iterations,
            ..
        }) => {
            log::warn!(
                "epoch {epoch}: convex solver stopped after {iterations} iterations at residual {residual:e}; using its best iterate"
            );
            Ok(best.into_iter().map(T::of).collect())
        }
        Err(e) => Err(e.into()),
    }
}

fn normalize_solution<T: Scalar>(w: &[T], epoch: usize, scale: T) -> Result<UnitVector<T>, DriverError> {
    let n = norm(w);
    if !(n > scale * T::of(1e-12)) {
        return Err(DriverError::DegenerateSolution {
            epoch,
            norm: n.to_f64_lossy(),
        });
    }
    Ok(normalize(w)?)
}

fn solve_epoch<T: Scalar>(
    config: &RunConfig<T>,
    data: &[LabeledExample<T>],
    w_k: &UnitVector<T>,
    r_k: T,
    tree: &SeedTree,
    k: usize,
) -> Result<UnitVector<T>, DriverError> {
    if data.is_empty() {
        log::warn!("EmptyEpoch: epoch {k} collected no labels, keeping w_k");
        return Ok(w_k.clone());
    }
    match config.update {
        Update::ZeroOne if w_k.dim() == 2 => Ok(erm_zero_one_2d(data, w_k, r_k)?.w),
        Update::ZeroOne => {
            let mut rng = tree.stream("search", k as u64);
            Ok(erm_zero_one_search(data, w_k, r_k, config.restarts, &mut rng)?.w)
        }
        Update::Convex { loss } => {
            let big_r = config.norm_bound.expect("validated");
            let w = convex_step(erm_convex(&loss, data, w_k, r_k, big_r, &config.solver), k)?;
            normalize_solution(&w, k, big_r)
        }
    }
}

/// Active learning from a stream and a label oracle.
///
/// `w_1` is drawn from the seed's `init` substream and `r_1 = 2`; every
/// instance is queried in the first epoch.
pub fn run_active<T, S, O>(
    stream: &mut S,
    oracle: &mut O,
    dim: usize,
    config: &RunConfig<T>,
    seed: u64,
    truth: Option<&Truth<'_, T>>,
) -> Result<RunRecord<T>, RunFailure<T>>
where
    T: Scalar,
    S: InstanceStream<T> + ?Sized,
    O: LabelOracle<T> + ?Sized,
{
    let tree = SeedTree::new(seed);
    let w1 = match UnitVector::random(dim, &mut tree.stream("init", 0)) {
        Ok(w) => w,
        Err(e) => return Err(failure(e.into(), Vec::new(), None, seed, dim)),
    };
    let mut record = RunRecord {
        epochs: Vec::with_capacity(config.epochs),
        final_w: w1.clone(),
        total_labels: 0,
        seed,
        config_digest: String::new(),
    };
    if let Err(e) = config.validate() {
        return Err(RunFailure { error: e, partial: Box::new(record) });
    }
    let mut w_k = w1;
    for k in 1..=config.epochs {
        match run_epoch(stream, oracle, config, &tree, truth, &w_k, k) {
            Ok((entry, next)) => {
                record.total_labels += entry.labels;
                record.epochs.push(entry);
                w_k = next;
                record.final_w = w_k.clone();
            }
            Err(error) => return Err(RunFailure { error, partial: Box::new(record) }),
        }
    }
    Ok(record)
}

fn failure<T: Scalar>(
    error: DriverError,
    epochs: Vec<EpochRecord<T>>,
    final_w: Option<UnitVector<T>>,
    seed: u64,
    dim: usize,
) -> RunFailure<T> {
    let final_w = final_w.unwrap_or_else(|| UnitVector::basis(dim.max(1), 0).expect("dimension ≥ 1"));
    RunFailure {
        error,
        partial: Box::new(RunRecord {
            total_labels: epochs.iter().map(|e| e.labels).sum(),
            epochs,
            final_w,
            seed,
            config_digest: String::new(),
        }),
    }
}

fn run_epoch<T, S, O>(
    stream: &mut S,
    oracle: &mut O,
    config: &RunConfig<T>,
    tree: &SeedTree,
    truth: Option<&Truth<'_, T>>,
    w_k: &UnitVector<T>,
    k: usize,
) -> Result<(EpochRecord<T>, UnitVector<T>), DriverError>
where
    T: Scalar,
    S: InstanceStream<T> + ?Sized,
    O: LabelOracle<T> + ?Sized,
{
    let r_k = T::of(radius(k)?);
    let n_k = config.schedule.budget(k)?;
    let ball = HypothesisBall::new(w_k.clone(), r_k);
    stream.begin_epoch(k);
    oracle.begin_epoch(k, &ball);
    let mut data = Vec::with_capacity(n_k);
    let mut scanned = 0usize;
    while data.len() < n_k {
        let Some(x) = stream.next_instance() else {
            return Err(DriverError::StreamExhausted {
                epoch: k,
                labels: data.len(),
                requested: n_k,
            });
        };
        scanned += 1;
        // r₁ = 2 queries everything, whatever the scale of x
        if k == 1 || should_query(&x, &ball)? {
            let y = oracle.label(&x)?;
            data.push(LabeledExample::new(x, y)?);
        }
    }
    let next = solve_epoch(config, &data, w_k, r_k, tree, k)?;
    let (chord_error, excess_risk_est) = annotate(truth, w_k, config.risk, tree, k)?;
    Ok((
        EpochRecord {
            k,
            w_k: w_k.clone(),
            r_k,
            n_k,
            labels: data.len(),
            scanned,
            chord_error,
            excess_risk_est,
        },
        next,
    ))
}

/// Passive baseline: labels the first `n_total` instances and solves one ERM
/// over the whole sphere (0-1) or the ball of radius `2R` at the origin
/// (convex).
pub fn run_passive<T, S, O>(
    stream: &mut S,
    oracle: &mut O,
    dim: usize,
    config: &RunConfig<T>,
    n_total: usize,
    seed: u64,
    truth: Option<&Truth<'_, T>>,
) -> Result<RunRecord<T>, RunFailure<T>>
where
    T: Scalar,
    S: InstanceStream<T> + ?Sized,
    O: LabelOracle<T> + ?Sized,
{
    let tree = SeedTree::new(seed);
    let w1 = match UnitVector::random(dim, &mut tree.stream("init", 0)) {
        Ok(w) => w,
        Err(e) => return Err(failure(e.into(), Vec::new(), None, seed, dim)),
    };
    let fail = |error: DriverError| failure(error, Vec::new(), Some(w1.clone()), seed, dim);
    if n_total == 0 {
        return Err(fail(DriverError::InvalidConfig("n_total must be at least 1".into())));
    }
    let mut passive = config.clone();
    passive.epochs = 1;
    passive.schedule = Schedule::Fixed { n: n_total };
    passive.validate().map_err(fail)?;

    let two = T::of(2.0);
    let ball = HypothesisBall::whole_sphere(w1.clone());
    stream.begin_epoch(1);
    oracle.begin_epoch(1, &ball);
    let mut data = Vec::with_capacity(n_total);
    while data.len() < n_total {
        let Some(x) = stream.next_instance() else {
            return Err(fail(DriverError::StreamExhausted {
                epoch: 1,
                labels: data.len(),
                requested: n_total,
            }));
        };
        let y = oracle.label(&x).map_err(|e| fail(e.into()))?;
        data.push(LabeledExample::new(x, y).map_err(|e| fail(e.into()))?);
    }
    let solved = match passive.update {
        Update::Convex { loss } => {
            let big_r = passive.norm_bound.expect("validated");
            let ball = SurrogateBall::new(vec![T::zero(); dim], two * big_r).map_err(|e| fail(e.into()))?;
            let origin = vec![T::zero(); dim];
            convex_step(erm_convex_in_ball(&loss, &data, &ball, &origin, &passive.solver), 1)
                .and_then(|w| normalize_solution(&w, 1, big_r))
        }
        Update::ZeroOne => solve_epoch(&passive, &data, &w1, two, &tree, 1),
    };
    let final_w = solved.map_err(fail)?;
    let (chord_error, excess_risk_est) = annotate(truth, &w1, passive.risk, &tree, 1).map_err(fail)?;
    Ok(RunRecord {
        epochs: vec![EpochRecord {
            k: 1,
            w_k: w1.clone(),
            r_k: two,
            n_k: n_total,
            labels: data.len(),
            scanned: data.len(),
            chord_error,
            excess_risk_est,
        }],
        final_w,
        total_labels: data.len(),
        seed,
        config_digest: String::new(),
    })
}

/// [`run_active`] on a synthetic model with per-epoch instance and label
/// substreams of `seed`.
pub fn run_active_on_model<T: Scalar>(
    model: &DataModel<T>,
    config: &RunConfig<T>,
    seed: u64,
) -> Result<RunRecord<T>, RunFailure<T>> {
    let tree = SeedTree::new(seed);
    let mut stream = ModelStream::new(model, tree);
    let mut oracle = AuditedOracle::new(ModelOracle::new(model, tree));
    let record = run_active(&mut stream, &mut oracle, model.dim(), config, seed, Some(&Truth { model }))?;
    debug_assert_eq!(oracle.labels(), record.total_labels);
    Ok(record)
}

/// [`run_passive`] on a synthetic model; sees the same instances and labels
/// as the first epoch of [`run_active_on_model`] with the same seed.
pub fn run_passive_on_model<T: Scalar>(
    model: &DataModel<T>,
    config: &RunConfig<T>,
    n_total: usize,
    seed: u64,
) -> Result<RunRecord<T>, RunFailure<T>> {
    let tree = SeedTree::new(seed);
    let mut stream = ModelStream::new(model, tree);
    let mut oracle = ModelOracle::new(model, tree);
    run_passive(&mut stream, &mut oracle, model.dim(), config, n_total, seed, Some(&Truth { model }))
}
