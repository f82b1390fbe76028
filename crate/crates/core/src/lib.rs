//! Numerical verification of the branching structure of planar two-phase
//! free boundaries: two-phase Bernoulli solutions, their Weierstrass
//! capillary surfaces, the thin two-membrane reduction, a smooth
//! non-analytic counterexample builder, and the obstacle-problem pipeline.

pub mod bernoulli;
pub mod cli;
pub mod complex;
pub mod counterexample;
pub mod error;
pub mod grid;
pub mod harmonic;
pub mod interp;
pub mod membrane;
pub mod obstacle;
pub mod report;
pub mod weierstrass;

pub use error::{Error, Result};
