use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::data::{Conditional, DataModel, Marginal};
use crate::driver::{RiskReporting, RunConfig, Schedule, TheoryConstants, Update};
use crate::losses::Loss;
use crate::rng::SeedTree;
use crate::solvers::ConvexSolverParams;

/// Synthetic model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub marginal: Marginal,
    pub conditional: Conditional<f64>,
    pub w_star: Vec<f64>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<DataModel<f64>, HarnessError> {
        Ok(DataModel::new(self.marginal, self.conditional, self.w_star.clone())?)
    }
}

/// Passive baseline search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PassiveSearch {
    /// Largest `n_total` probed before a point is marked censored.
    pub cap: usize,
    pub bootstrap_resamples: usize,
}

impl Default for PassiveSearch {
    fn default() -> Self {
        Self {
            cap: 200_000,
            bootstrap_resamples: 2000,
        }
    }
}

/// Sizes and thresholds of the verification suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    /// Draws per `(d, r)` cell of the query-rule sweep.
    pub equivalence_samples: usize,
    pub equivalence_dims: Vec<usize>,
    pub equivalence_radii: Vec<f64>,
    pub psi_tolerance: f64,
    pub lemma_pairs: usize,
    pub lemma_n_mc: usize,
    /// Constant of the Gaussian lower bound `c·θ ≤ Pr(dis)`.
    pub lemma_c: f64,
    pub lemma_sphere_dims: Vec<usize>,
    pub lemma_gaussian_dim: usize,
    pub gradient_triples: usize,
    pub gradient_tolerance: f64,
    pub gap: GapCheck,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            equivalence_samples: 100_000,
            equivalence_dims: vec![2, 3, 10],
            equivalence_radii: vec![2.0, 1.0, 0.5, 0.25, 0.125],
            psi_tolerance: 1e-6,
            lemma_pairs: 20,
            lemma_n_mc: 1_000_000,
            lemma_c: std::f64::consts::FRAC_1_PI,
            lemma_sphere_dims: vec![2, 5],
            lemma_gaussian_dim: 10,
            gradient_triples: 100,
            gradient_tolerance: 1e-5,
            gap: GapCheck::default(),
        }
    }
}

/// The scaling experiment on the uniform circle with the affine conditional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapCheck {
    pub loss: Loss,
    pub w_star: Vec<f64>,
    pub n: usize,
    pub radius: f64,
    pub trials: usize,
    /// Candidates drawn per radius.
    pub candidates: usize,
    pub band: [f64; 2],
}

impl Default for GapCheck {
    fn default() -> Self {
        Self {
            loss: Loss::TruncatedQuadratic,
            w_star: vec![0.3, 0.4],
            n: 400,
            radius: 0.8,
            trials: 50,
            candidates: 200,
            band: [1.4, 2.8],
        }
    }
}

impl GapCheck {
    pub fn model(&self) -> Result<DataModel<f64>, HarnessError> {
        Ok(DataModel::new(Marginal::UniformSphere, Conditional::Affine, self.w_star.clone())?)
    }
}

/// One experiment: model, learner, seeds and the verification settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every run and estimator derives its stream from it.
    #[serde(default)]
    pub seed: u64,
    /// Run indices; each yields one active run (and one passive run per probe).
    pub seeds: Vec<u64>,
    pub model: ModelSpec,
    pub update: Update,
    pub schedule: Schedule,
    /// `m` for single runs; curves derive `m` from each target.
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// `R`, required by the convex update.
    #[serde(default)]
    pub norm_bound: Option<f64>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub solver: ConvexSolverParams,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub risk: RiskReporting,
    #[serde(default)]
    pub passive: PassiveSearch,
    #[serde(default)]
    pub checks: CheckConfig,
    /// Constants for the `budget` report.
    #[serde(default)]
    pub theory: Option<TheoryConstants>,
}

fn default_epochs() -> usize {
    6
}

fn default_restarts() -> usize {
    16
}

impl ExperimentConfig {
    /// Checks that hold for every subcommand; seeds and targets are checked
    /// where they are used.
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.model.build()?;
        self.run_config(self.epochs).validate()?;
        if let Some(t) = &self.theory {
            t.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        Ok(())
    }

    pub fn require_seeds(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        Ok(())
    }

    /// Targets must lie in `(0, 2)` and strictly decrease.
    pub fn require_epsilons(&self) -> Result<(), HarnessError> {
        if self.epsilons.is_empty() {
            return Err(HarnessError::Config("at least one epsilon target is required".into()));
        }
        if let Some(bad) = self.epsilons.iter().find(|&&e| !(e > 0.0 && e < 2.0)) {
            return Err(HarnessError::Config(format!("epsilon {bad} outside (0, 2)")));
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return Err(HarnessError::Config("epsilon targets must be strictly decreasing".into()));
        }
        Ok(())
    }

    pub fn run_config(&self, epochs: usize) -> RunConfig<f64> {
        let mut c = RunConfig::new(self.update, self.schedule, epochs);
        c.norm_bound = self.norm_bound;
        c.solver = self.solver;
        c.restarts = self.restarts;
        c.risk = self.risk;
        c
    }

    /// Seed of the run with index `s`.
    pub fn run_seed(&self, s: u64) -> u64 {
        SeedTree::new(self.seed).child("run", s).seed()
    }

    pub fn tree(&self) -> SeedTree {
        SeedTree::new(self.seed)
    }
}
