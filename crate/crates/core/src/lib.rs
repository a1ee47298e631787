//! Statistical-distance monitoring for time-series forecasting models.
//!
//! The crate quantifies how far runtime data has drifted from the data a
//! forecasting model was trained on, and turns that drift into two
//! decision-grade outputs:
//!
//! * a **reliability score** per data instance, blending the prediction
//!   errors of the instance's nearest cluster neighbors with the instance's
//!   statistical distance from that cluster ([`stadre`]), and
//! * a **robustness verdict** that compares an instance's statistical
//!   distance from the training set against the distance at which a fitted
//!   performance curve crosses a required minimum performance ([`stadro`]).
//!
//! Drift itself is measured by two-sample distances on empirical CDFs
//! ([`distance`]): Wasserstein (the default), Kolmogorov–Smirnov and
//! Cramér–von Mises. Neighborhood structure comes from K-means over sliding
//! windows under dynamic time warping ([`cluster`]).
//!
//! All numeric code is generic over the scalar type via [`num::Scalar`]
//! (`f32` or `f64`); the `*64` aliases below pin the common double-precision
//! pipeline used by the CLI.

pub mod cluster;
pub mod distance;
pub mod forecast;
pub mod num;
pub mod seed;
pub mod series;
pub mod stadre;
pub mod stadro;

pub(crate) mod io;

pub use io::IngestError;

/// Double-precision aliases for the main pipeline types.
pub type TimeSeries64 = series::TimeSeries<f64>;
pub type DatasetSplit64 = series::DatasetSplit<f64>;
pub type Normalizer64 = series::Normalizer<f64>;
pub type Window64 = series::Window<f64>;
pub type Segment64 = series::Segment<f64>;
pub type ClusterModel64 = cluster::ClusterModel<f64>;
pub type FittedCurve64 = stadro::FittedCurve<f64>;
pub type ReliabilityReport64 = stadre::ReliabilityReport<f64>;
pub type RobustnessVerdict64 = stadro::RobustnessVerdict<f64>;
