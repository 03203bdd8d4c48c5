//! Scale-localized energy-flux diagnostics for periodic MHD turbulence.
//!
//! The crate has three layers. The bottom layer holds spectral field
//! machinery: grids, FFTs, derivatives, solenoidal projection, and a
//! pseudo-spectral MHD solver. The middle layer builds geometric test
//! functions: ball covers of an averaging domain and smooth space-time
//! cutoffs with certified gradient and Hessian bounds. The top layer
//! integrates energy budgets against those cutoffs, averages fluxes over
//! cover ensembles, and renders verdicts about scale-to-scale cascade.

pub mod cover;
pub mod cutoff;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod fft;
pub mod field;
pub mod flux;
pub mod gen;
pub mod grid;
pub mod nondim;
pub mod params;
pub mod reduce;
pub mod report;
pub mod series;
pub mod snapshot;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{ScalarField, VectorField};
pub use grid::Grid;
