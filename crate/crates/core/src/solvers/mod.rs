//! Per-epoch empirical risk minimizers: the surrogate problem over a ball
//! and the 0-1 problem over an arc of the unit sphere.

mod convex;
mod zero_one;

pub use convex::{
    erm_convex, erm_convex_in_ball, project_to_ball, surrogate_gradient, surrogate_objective, ConvexSolution,
    ConvexSolverParams, SurrogateBall,
};
pub use zero_one::{erm_zero_one_2d, erm_zero_one_search, zero_one_errors, ZeroOneSolution};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("surrogate argument {argument} fell below the exponential clamp")]
    SolverDiverged { argument: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxItersExceeded {
        best: Vec<f64>,
        objective: f64,
        residual: f64,
        iterations: usize,
    },
    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),
    #[error("the exact 0-1 solver needs d = 2, got d = {0}")]
    DimensionNotTwo(usize),
}

pub type Result<T, E = SolverError> = std::result::Result<T, E>;
