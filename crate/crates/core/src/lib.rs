//! Quench dynamics of pairwise quantum correlations in the open spin-1/2 XXZ
//! chain.
//!
//! Three backends share one interface: exact diagonalization for small
//! chains, TEBD on matrix product states for pure states, and purified MPS
//! for thermal states. Correlation measures work on two-site reduced density
//! matrices.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`.

pub mod cli;
pub mod correlations;
pub mod error;
pub mod exact;
pub mod harness;
mod lapack;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod record;
pub mod scalar;
pub mod thermal;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

pub type ChainParams = model::ChainParams<f64>;
pub type QuenchSpec = model::QuenchSpec<f64>;
pub type TruncationPolicy = linalg::TruncationPolicy<f64>;
pub type MpsState = mps::MpsState<f64>;
pub type StateVector = exact::StateVector<f64>;
pub type DensityMatrix = exact::DensityMatrix<f64>;
pub type BondCorrelators = correlations::BondCorrelators<f64>;
pub type TwoQubitDensity = correlations::TwoQubitDensity<f64>;
pub type PurifiedState = thermal::PurifiedState<f64>;
pub type TimeSeriesRecord = record::TimeSeriesRecord<f64>;
pub type RunConfig = harness::RunConfig<f64>;
pub type SweepResult = harness::SweepResult<f64>;
