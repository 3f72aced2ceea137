use crate::data::{DataModel, ModelError};
use crate::geometry::{disagreement_exists_oracle, HypothesisBall, RadiusKind};
use crate::rng::{RngStream, SeedTree};
use crate::scalar::Scalar;

/// Source of unlabeled instances, scanned in order.
pub trait InstanceStream<T> {
    /// Called before each epoch's scan.
    fn begin_epoch(&mut self, _k: usize) {}

    /// `None` once the pool is exhausted.
    fn next_instance(&mut self) -> Option<Vec<T>>;
}

/// Answers label queries with `y ∈ {−1, +1}`.
pub trait LabelOracle<T> {
    fn begin_epoch(&mut self, _k: usize, _ball: &HypothesisBall<T>) {}

    fn label(&mut self, x: &[T]) -> Result<i8, ModelError>;
}

/// Inexhaustible i.i.d. draws from a model's marginal, one substream per epoch.
pub struct ModelStream<'a, T> {
    model: &'a DataModel<T>,
    tree: SeedTree,
    rng: RngStream,
}

impl<'a, T: Scalar> ModelStream<'a, T> {
    pub fn new(model: &'a DataModel<T>, tree: SeedTree) -> Self {
        Self {
            model,
            tree,
            rng: tree.stream("instances", 0),
        }
    }
}

impl<T: Scalar> InstanceStream<T> for ModelStream<'_, T> {
    fn begin_epoch(&mut self, k: usize) {
        self.rng = self.tree.stream("instances", k as u64);
    }

    fn next_instance(&mut self) -> Option<Vec<T>> {
        Some(self.model.sample_instance(&mut self.rng))
    }
}

/// Labels drawn from the model's conditional, one substream per epoch.
pub struct ModelOracle<'a, T> {
    model: &'a DataModel<T>,
    tree: SeedTree,
    rng: RngStream,
}

impl<'a, T: Scalar> ModelOracle<'a, T> {
    pub fn new(model: &'a DataModel<T>, tree: SeedTree) -> Self {
        Self {
            model,
            tree,
            rng: tree.stream("labels", 0),
        }
    }
}

impl<T: Scalar> LabelOracle<T> for ModelOracle<'_, T> {
    fn begin_epoch(&mut self, k: usize, _ball: &HypothesisBall<T>) {
        self.rng = self.tree.stream("labels", k as u64);
    }

    fn label(&mut self, x: &[T]) -> Result<i8, ModelError> {
        Ok(self.model.label_oracle(x.to_vec(), &mut self.rng)?.y)
    }
}

/// Finite pool of instances; runs out.
pub struct PoolStream<T> {
    pool: Vec<Vec<T>>,
    next: usize,
}

impl<T> PoolStream<T> {
    pub fn new(pool: Vec<Vec<T>>) -> Self {
        Self { pool, next: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.next
    }
}

impl<T: Clone> InstanceStream<T> for PoolStream<T> {
    fn next_instance(&mut self) -> Option<Vec<T>> {
        let x = self.pool.get(self.next)?.clone();
        self.next += 1;
        Some(x)
    }
}

/// Counts label requests and checks each against the epoch's disagreement
/// region, using the angular oracle rather than the driver's own test.
pub struct AuditedOracle<O, T> {
    inner: O,
    ball: Option<HypothesisBall<T>>,
    labels: usize,
    violations: usize,
}

impl<O, T> AuditedOracle<O, T> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            ball: None,
            labels: 0,
            violations: 0,
        }
    }

    pub fn labels(&self) -> usize {
        self.labels
    }

    /// Labels requested for instances outside the disagreement region.
    pub fn violations(&self) -> usize {
        self.violations
    }
}

impl<T: Scalar, O: LabelOracle<T>> LabelOracle<T> for AuditedOracle<O, T> {
    fn begin_epoch(&mut self, k: usize, ball: &HypothesisBall<T>) {
        self.ball = Some(ball.clone());
        self.inner.begin_epoch(k, ball);
    }

    fn label(&mut self, x: &[T]) -> Result<i8, ModelError> {
        self.labels += 1;
        let allowed = match &self.ball {
            None => false,
            Some(ball) => match ball.kind()? {
                RadiusKind::WholeSphere => true,
                RadiusKind::Local => disagreement_exists_oracle(x, ball)?,
            },
        };
        if !allowed {
            self.violations += 1;
        }
        self.inner.label(x)
    }
}
