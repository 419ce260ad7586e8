//! Parametric information-theoretic network inference for multichannel
//! sensor time series.
//!
//! The crate is organised bottom-up:
//!
//! * [`series`] holds the time-series container, standardization and the
//!   sample mean/covariance shared by every estimator.
//! * [`special`] and [`distributions`] provide the modified Bessel function of
//!   the second kind, Gaussian and Laplace densities (uni- and multivariate),
//!   samplers and the histogram fit diagnostic.
//! * [`estimators`] turns fitted models into entropies, mutual information and
//!   conditional mutual information (closed form for Gaussian, Monte Carlo for
//!   Laplace).
//! * [`omii`] runs the greedy discovery / removal procedure with permutation
//!   shuffle tests and assembles the directed interaction network.
//! * [`spatial`] covers sensor-grid geometry, nearest-neighbour MI maps and
//!   scenario differencing.
//! * [`synthetic`] generates ground-truth processes with planted couplings.
//! * [`io`] and [`pipeline`] ingest CSV data and write the report bundle.

pub mod distributions;
pub mod error;
pub mod estimators;
pub mod io;
pub mod omii;
pub mod pipeline;
pub mod seed;
pub mod series;
pub mod spatial;
pub mod special;
pub mod synthetic;

pub use error::{Error, Result};
pub use estimators::{Estimate, Estimator, EstimatorConfig, Family};
pub use omii::{InteractionNetwork, OmiiConfig, OmiiEngine, ParentSet};
pub use series::{Axis, ChannelId, SampleStats, TimeSeriesMatrix};
pub use spatial::SensorGrid;

/// Version string embedded in every output file.
pub const ARTIFACT_VERSION: &str = concat!("omii-core ", env!("CARGO_PKG_VERSION"));
