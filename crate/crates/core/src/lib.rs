//! Data-driven identification of population balance equations.
//!
//! Given a transient number-density field `n(x, t)`, the crate evaluates a
//! library of candidate birth, death and growth terms, runs sequential
//! thresholded least squares over every combination of process sub-libraries,
//! and picks the model that balances fit, sparsity and physical realizability
//! (every birth paired with its death). Forward solvers for breakage,
//! aggregation and growth generate the benchmark data and re-simulate
//! identified models.
//!
//! The modules follow the data flow:
//!
//! - [`grid`]: density fields, CSV I/O, differentiation, noise, smoothing
//! - [`operators`]: the five integral/differential operator families
//! - [`library`]: candidate libraries, column elimination, symbolic vector
//! - [`stls`]: sparse regression
//! - [`selector`]: solution pools and the realizability-aware cost
//! - [`model`]: formulated equations, kernel deduction, error metrics
//! - [`solver`]: forward simulation and the benchmark case catalog
//! - [`pipeline`]: config-driven discovery, benchmark, study and plot data

pub mod error;
pub mod grid;
pub mod library;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod pipeline;
pub mod selector;
pub mod solver;
pub mod stls;

pub use error::{Error, Result};
