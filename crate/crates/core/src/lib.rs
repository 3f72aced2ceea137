//! Epoch-based selective sampling for homogeneous halfspaces.
//!
//! Each epoch queries labels only inside a band around the current
//! hypothesis, fits either the 0-1 loss or a convex surrogate over a shrinking
//! region, and halves the region's radius. The numeric core is generic over
//! [`scalar::Scalar`] (`f32` or `f64`); the experiment harness works in
//! [`Real`].

// `!(x > 0)` is how parameter checks reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod driver;
pub mod geometry;
pub mod harness;
pub mod losses;
pub mod rng;
pub mod scalar;
pub mod solvers;

/// Scalar used by the harness and the command line.
pub type Real = f64;
pub type Direction = geometry::UnitVector<Real>;
pub type Model = data::DataModel<Real>;
pub type Example = data::LabeledExample<Real>;
pub type Config = driver::RunConfig<Real>;
pub type Record = driver::RunRecord<Real>;
