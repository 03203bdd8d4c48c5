use std::path::PathBuf;
use thiserror::Error;

/// Error type for every fallible operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),

    #[error("field generation: {0}")]
    Gen(String),

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    Checksum {
        path: PathBuf,
        stored: u64,
        computed: u64,
    },

    #[error("parameters: {0}")]
    Params(String),

    #[error("series: {0}")]
    Series(String),

    #[error("solver: {0}")]
    Solver(String),

    #[error(
        "CFL violation at step {step} (t = {time:.6}): dt {dt:.3e} exceeds \
         limit {limit:.3e} for max speed {speed:.3e}"
    )]
    Cfl {
        step: usize,
        time: f64,
        dt: f64,
        limit: f64,
        speed: f64,
    },

    #[error("instability: {0}")]
    Instability(String),

    #[error("cover: {0}")]
    Cover(String),

    #[error("cover infeasible: violated bound: {bound}")]
    CoverInfeasible { bound: String },

    #[error("cutoff: {0}")]
    Cutoff(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
