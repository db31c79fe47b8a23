//! Passive multi-target localization from distributed uniform-linear-array
//! sensing nodes.
//!
//! The pipeline is: geometry ([`geometry`]) and a scenario ([`synth`]) produce
//! stacked snapshots; [`covariance`] forms sample and analytic covariances;
//! [`estimators`] turns a batch into a grid power spectrum (ISR, MVDR or
//! beam-space); [`metrics`] extracts peaks and scores them against the truth.
//! [`harness`] holds the scenario file format, CSV/SVG output and the
//! command-line driver.
//!
//! Everything is generic over [`Real`] (`f32` or `f64`); the `*64` / `*32`
//! aliases below fix the scalar.

pub mod covariance;
pub mod estimators;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod scalar;
pub mod synth;

pub use scalar::{CMatrix, CVector, Cx, Real};

pub type Point64 = geometry::Point<f64>;
pub type SensingNode64 = geometry::SensingNode<f64>;
pub type SearchGrid64 = geometry::SearchGrid<f64>;
pub type SteeringSet64 = geometry::SteeringSet<f64>;
pub type Scenario64 = synth::Scenario<f64>;
pub type SampleBatch64 = synth::SampleBatch<f64>;
pub type CovarianceMatrix64 = covariance::CovarianceMatrix<f64>;
pub type PowerSpectrum64 = estimators::PowerSpectrum<f64>;
pub type EstimatorOptions64 = estimators::EstimatorOptions<f64>;

pub type Point32 = geometry::Point<f32>;
pub type SensingNode32 = geometry::SensingNode<f32>;
pub type SearchGrid32 = geometry::SearchGrid<f32>;
pub type SteeringSet32 = geometry::SteeringSet<f32>;
pub type Scenario32 = synth::Scenario<f32>;
pub type SampleBatch32 = synth::SampleBatch<f32>;
pub type CovarianceMatrix32 = covariance::CovarianceMatrix<f32>;
pub type PowerSpectrum32 = estimators::PowerSpectrum<f32>;
pub type EstimatorOptions32 = estimators::EstimatorOptions<f32>;
