//! Solver for the initial-boundary value problem of an incompressible fluid
//! mixture in `[0, 1]` whose components evaporate at position- and
//! time-dependent rates.
//!
//! The pipeline is constructive: a flow `θ` (a candidate family of
//! characteristic curves) determines a point process per component whose
//! no-arrival probabilities define a new flow `G(θ)`. Picard iteration of `G`
//! converges to the characteristic curves `y_C`, from which the measure
//! solution `μ_t` is read off.
//!
//! Modules follow that pipeline: [`model`] (rates, weights, initial
//! densities), [`grid`] (the `(ξ, t)` mesh and flows), [`process`] (arrival
//! probabilities), [`sampler`] (Monte Carlo oracle), [`picard`] (the map `G`
//! and the iteration) and [`solution`] (reconstruction and residual checks).
//! [`config`] reads scenario files.

pub mod config;
pub mod error;
pub mod grid;
pub mod model;
pub mod picard;
pub mod process;
pub mod quad;
pub mod sampler;
pub mod solution;

pub use error::{Error, Result};
pub use grid::{Flow, Grid, GridSpec};
pub use model::{Density, InitialDensity, RateFunction, RateMixture, Scenario};
