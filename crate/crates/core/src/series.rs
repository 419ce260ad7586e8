//! Time-series container, standardization and sample statistics.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sampling rate of the bridge accelerometer records.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 128.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Lateral,
    Vertical,
}

impl Axis {
    pub fn short_name(self) -> &'static str {
        match self {
            Axis::Lateral => "lat",
            Axis::Vertical => "vert",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lat" | "lateral" => Ok(Axis::Lateral),
            "vert" | "vertical" => Ok(Axis::Vertical),
            other => Err(Error::InvalidConfig(format!("unknown axis {other:?}"))),
        }
    }
}

/// A physical channel: one axis of one accelerometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChannelId {
    pub sensor: u32,
    pub axis: Axis,
}

impl ChannelId {
    pub fn new(sensor: u32, axis: Axis) -> Self {
        ChannelId { sensor, axis }
    }

    pub fn lateral(sensor: u32) -> Self {
        ChannelId::new(sensor, Axis::Lateral)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}_{}", self.sensor, self.axis)
    }
}

impl FromStr for ChannelId {
    type Err = Error;

    /// Parses the CSV header form `s<index>_<lat|vert>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad channel name {s:?}, expected s<index>_<lat|vert>"));
        let rest = s.trim().strip_prefix('s').ok_or_else(bad)?;
        let (index, axis) = rest.split_once('_').ok_or_else(bad)?;
        let sensor: u32 = index.parse().map_err(|_| bad())?;
        if sensor == 0 {
            return Err(bad());
        }
        let axis = match axis {
            "lat" => Axis::Lateral,
            "vert" => Axis::Vertical,
            _ => return Err(bad()),
        };
        Ok(ChannelId { sensor, axis })
    }
}

impl Serialize for ChannelId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ChannelId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// T×N matrix of samples stored column-major, one column per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesMatrix {
    columns: Vec<Vec<f64>>,
    channels: Vec<ChannelId>,
    sample_rate_hz: f64,
}

impl TimeSeriesMatrix {
    /// Validates shape, finiteness and channel uniqueness.
    pub fn new(columns: Vec<Vec<f64>>, channels: Vec<ChannelId>, sample_rate_hz: f64) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::NoChannels);
        }
        if columns.len() != channels.len() {
            return Err(Error::DimensionMismatch {
                expected: channels.len(),
                got: columns.len(),
            });
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate {sample_rate_hz} must be positive"
            )));
        }
        let t = columns[0].len();
        if t < 2 {
            return Err(Error::TooFewSamples { min: 2, got: t });
        }
        let mut seen = HashSet::with_capacity(channels.len());
        for (k, (col, ch)) in columns.iter().zip(&channels).enumerate() {
            if col.len() != t {
                return Err(Error::RaggedColumns {
                    channel: k,
                    expected: t,
                    got: col.len(),
                });
            }
            if let Some(bad) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { channel: *ch, t: bad });
            }
            if !seen.insert(*ch) {
                return Err(Error::DuplicateChannel(*ch));
            }
        }
        Ok(TimeSeriesMatrix {
            columns,
            channels,
            sample_rate_hz,
        })
    }

    /// Channels named `s1_lat, s2_lat, ...` at the default rate.
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let channels = (1..=columns.len() as u32).map(ChannelId::lateral).collect();
        Self::new(columns, channels, DEFAULT_SAMPLE_RATE_HZ)
    }

    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_channels(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn channel_index(&self, id: ChannelId) -> Option<usize> {
        self.channels.iter().position(|c| *c == id)
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k < self.n_channels() {
            Ok(())
        } else {
            Err(Error::ChannelOutOfRange {
                index: k,
                n: self.n_channels(),
            })
        }
    }

    /// New matrix holding only the given channels, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        for &k in indices {
            self.check_index(k)?;
        }
        Self::new(
            indices.iter().map(|&k| self.columns[k].clone()).collect(),
            indices.iter().map(|&k| self.channels[k]).collect(),
            self.sample_rate_hz,
        )
    }

    /// All channels on one axis, in matrix order.
    pub fn axis_indices(&self, axis: Axis) -> Vec<usize> {
        self.channels
            .iter()
            .enumerate()
            .filter(|(_, c)| c.axis == axis)
            .map(|(k, _)| k)
            .collect()
    }

    /// Transforms every column to `(x - mean) / sd`, with the sample standard
    /// deviation taken over `T - 1`.
    pub fn standardize(&self) -> Result<Self> {
        let mut columns = Vec::with_capacity(self.n_channels());
        for (col, ch) in self.columns.iter().zip(&self.channels) {
            let (mean, sd) = mean_sd(col);
            let scale = col.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            // rounding leaves a residual spread of a few ulps on constant columns
            if !(sd > 1e-13 * scale) || !sd.is_finite() {
                return Err(Error::ZeroVariance(*ch));
            }
            columns.push(col.iter().map(|v| (v - mean) / sd).collect());
        }
        Self::new(columns, self.channels.clone(), self.sample_rate_hz)
    }
}

/// Empirical mean and `T - 1` standard deviation.
pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// How to repair a covariance matrix that is not numerically positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgePolicy {
    /// Ridge `eps * I`, `eps = 1e-10 * tr/N`, escalated by ×10 up to `1e-4 * tr/N`.
    #[default]
    Escalate,
    /// No repair: a non-positive-definite covariance is an error.
    Off,
}

const RIDGE_START: f64 = 1e-10;
const RIDGE_MAX: f64 = 1e-4;

/// Sample mean and unbiased covariance of a channel subset, after any ridge repair.
#[derive(Debug, Clone)]
pub struct SampleStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    /// Ridge added to the diagonal (0 when the raw estimate was already positive definite).
    pub ridge: f64,
    cholesky: Cholesky<f64, Dyn>,
}

impl SampleStats {
    /// Wraps an exactly specified mean and covariance, applying the same
    /// positive-definiteness repair as estimated statistics.
    pub fn from_moments(mean: DVector<f64>, covariance: DMatrix<f64>, policy: RidgePolicy) -> Result<Self> {
        let d = covariance.nrows();
        if covariance.ncols() != d || mean.len() != d || d == 0 {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                got: covariance.nrows(),
            });
        }
        let (covariance, ridge, cholesky) = regularize(covariance, policy)?;
        Ok(SampleStats {
            mean,
            covariance,
            ridge,
            cholesky,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = Σ`.
    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.cholesky
    }

    /// `ln det Σ` from the Cholesky factor.
    pub fn ln_det(&self) -> f64 {
        let l = self.cholesky.l_dirty();
        2.0 * (0..self.dim()).map(|k| l[(k, k)].ln()).sum::<f64>()
    }
}

/// Cholesky that also rejects numerically negligible pivots.
fn strict_cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let max_diag = m.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b));
    if !(max_diag > 0.0) {
        return None;
    }
    let chol = Cholesky::new(m.clone())?;
    let floor = f64::EPSILON * max_diag;
    let l = chol.l_dirty();
    if (0..m.nrows()).all(|k| l[(k, k)] * l[(k, k)] > floor) {
        Some(chol)
    } else {
        None
    }
}

fn regularize(mut cov: DMatrix<f64>, policy: RidgePolicy) -> Result<(DMatrix<f64>, f64, Cholesky<f64, Dyn>)> {
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance { ridge: 0.0 });
    }
    // Symmetrize exactly so downstream factorizations see a symmetric matrix.
    let d = cov.nrows();
    for a in 0..d {
        for b in (a + 1)..d {
            let m = 0.5 * (cov[(a, b)] + cov[(b, a)]);
            cov[(a, b)] = m;
            cov[(b, a)] = m;
        }
    }
    if let Some(chol) = strict_cholesky(&cov) {
        return Ok((cov, 0.0, chol));
    }
    if policy == RidgePolicy::Off {
        return Err(Error::SingularCovariance { ridge: 0.0 });
    }
    let scale = cov.trace() / d as f64;
    if !(scale > 0.0) {
        return Err(Error::SingularCovariance { ridge: 0.0 });
    }
    let mut factor = RIDGE_START;
    let mut last = 0.0;
    while factor <= RIDGE_MAX * (1.0 + 1e-9) {
        let eps = factor * scale;
        let mut repaired = cov.clone();
        for k in 0..d {
            repaired[(k, k)] += eps;
        }
        if let Some(chol) = strict_cholesky(&repaired) {
            return Ok((repaired, eps, chol));
        }
        last = eps;
        factor *= 10.0;
    }
    Err(Error::SingularCovariance { ridge: last })
}

/// Unbiased covariance entry of two columns with known means.
#[inline]
pub(crate) fn cross_cov(a: &[f64], ma: f64, b: &[f64], mb: f64) -> f64 {
    let n = a.len() as f64;
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    s / (n - 1.0)
}

/// Sample statistics of arbitrary equal-length columns.
pub fn stats_from_columns(cols: &[&[f64]], policy: RidgePolicy) -> Result<SampleStats> {
    let d = cols.len();
    if d == 0 {
        return Err(Error::InvalidSubset("empty subset".into()));
    }
    let t = cols[0].len();
    if t <= d {
        return Err(Error::TooFewSamples { min: d + 1, got: t });
    }
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / t as f64).collect();
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = cross_cov(cols[a], means[a], cols[b], means[b]);
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    SampleStats::from_moments(DVector::from_vec(means), cov, policy)
}

/// Empirical mean and unbiased covariance of `subset`, ridge-repaired by default.
pub fn estimate_stats(x: &TimeSeriesMatrix, subset: &[usize]) -> Result<SampleStats> {
    estimate_stats_with(x, subset, RidgePolicy::Escalate)
}

pub fn estimate_stats_with(x: &TimeSeriesMatrix, subset: &[usize], policy: RidgePolicy) -> Result<SampleStats> {
    validate_subset(x, subset)?;
    if x.len() <= subset.len() {
        return Err(Error::TooFewSamples {
            min: subset.len() + 1,
            got: x.len(),
        });
    }
    let cols: Vec<&[f64]> = subset.iter().map(|&k| x.column(k)).collect();
    stats_from_columns(&cols, policy)
}

pub(crate) fn validate_subset(x: &TimeSeriesMatrix, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::InvalidSubset("empty subset".into()));
    }
    let mut seen = HashSet::with_capacity(subset.len());
    for &k in subset {
        x.check_index(k)?;
        if !seen.insert(k) {
            return Err(Error::InvalidSubset(format!("channel index {k} repeated")));
        }
    }
    Ok(())
}
