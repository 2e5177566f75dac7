use thiserror::Error;

use crate::model::ValidationReport;
use crate::picard::IterationDiagnostics;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("scenario failed validation: {}", .0.summary())]
    Validation(Box<ValidationReport>),

    #[error("query out of domain: {0}")]
    Domain(String),

    #[error("flow invariant violated: {what} (magnitude {magnitude:.3e})")]
    FlowInvariant { what: String, magnitude: f64 },

    #[error("sampler majorant exceeded: rate {rate} above bound {bound}")]
    Majorant { rate: f64, bound: f64 },

    #[error("contraction envelope violated at iteration {iter}: d = {d:.3e} > e = {envelope:.3e}")]
    Envelope { iter: usize, d: f64, envelope: f64 },

    #[error("no convergence after {} iterations (last d = {:.3e})", .0.records.len(), .0.last_distance())]
    NoConvergence(Box<IterationDiagnostics>),

    #[error("inverse of y_C failed at y = {y} (t index {t_index})")]
    Inversion { y: f64, t_index: usize },

    #[error("{0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
