//! Gaussian and Laplace densities, samplers and the histogram fit diagnostic.
//!
//! The multivariate Laplace family is the elliptical scale mixture
//! `X = μ + √W · A z`, `W ~ Exp(1)`, `z ~ N(0, I)`, `A Aᵀ = Σ`, whose density is
//!
//! ```text
//! f(x) = (2π)^{-d/2} (2/λ) K_{d/2-1}(√(2q/λ)) / (√(λq/2))^{d/2-1}
//! q(x) = λ (x-μ)ᵀ Σ⁻¹ (x-μ)
//! ```
//!
//! with `λ = det(Σ)^{1/d}`, so that `Σ` is exactly the covariance of `X`. For
//! `d = 2` this is `λ = √det Σ`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{RidgePolicy, SampleStats};
use crate::special::ln_bessel_k;

/// Lower bound on `q(x)` for `d ≥ 2`, where the density diverges at the mode.
pub const Q_FLOOR: f64 = 1e-12;

/// Scale `b` of the unit-variance Laplace law.
pub const UNIT_LAPLACE_SCALE: f64 = SQRT_2 / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum UnivariateModel {
    Normal { mean: f64, sd: f64 },
    Laplace { mean: f64, scale: f64 },
}

impl UnivariateModel {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidConfig(format!("normal sd {sd} must be positive")));
        }
        Ok(UnivariateModel::Normal { mean, sd })
    }

    pub fn laplace(mean: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidConfig(format!("laplace scale {scale} must be positive")));
        }
        Ok(UnivariateModel::Laplace { mean, scale })
    }

    /// Zero-mean, unit-variance normal baseline.
    pub fn standard_normal() -> Self {
        UnivariateModel::Normal { mean: 0.0, sd: 1.0 }
    }

    /// Zero-mean, unit-variance Laplace baseline (`b = √2/2`).
    pub fn standard_laplace() -> Self {
        UnivariateModel::Laplace {
            mean: 0.0,
            scale: UNIT_LAPLACE_SCALE,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            UnivariateModel::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            UnivariateModel::Laplace { mean, scale } => (-(x - mean).abs() / scale).exp() / (2.0 * scale),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            UnivariateModel::Normal { sd, .. } => sd * sd,
            UnivariateModel::Laplace { scale, .. } => 2.0 * scale * scale,
        }
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> f64 {
        match *self {
            UnivariateModel::Normal { sd, .. } => 0.5 * (2.0 * PI * std::f64::consts::E * sd * sd).ln(),
            UnivariateModel::Laplace { scale, .. } => 1.0 + (2.0 * scale).ln(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            UnivariateModel::Normal { mean, sd } => mean + sd * rng.sample::<f64, _>(StandardNormal),
            UnivariateModel::Laplace { mean, scale } => {
                // inverse cdf on u in (-1/2, 1/2)
                let u: f64 = rng.random::<f64>() - 0.5;
                mean - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
        }
    }

    pub fn sample(&self, m: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::seed::rng(seed);
        (0..m).map(|_| self.draw(&mut rng)).collect()
    }
}

/// A continuous multivariate law that can be sampled and evaluated in log space.
pub trait Density: Sync {
    fn dim(&self) -> usize;

    /// `ln f(x)`; `x.len()` must equal [`Density::dim`].
    fn ln_density(&self, x: &[f64]) -> f64;

    /// Writes one draw into `out`.
    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]);
}

/// `ln f` of the multivariate Laplace law as a function of `q` and `λ`.
pub fn laplace_ln_density_from_q(dim: usize, lambda: f64, q: f64) -> f64 {
    let d = dim as f64;
    if dim == 1 {
        // K_{-1/2} closed form; finite at q = 0
        let u = (2.0 * q / lambda).sqrt();
        return -u - 0.5 * (2.0 * lambda).ln();
    }
    let q = q.max(Q_FLOOR);
    let order = 0.5 * d - 1.0;
    let u = (2.0 * q / lambda).sqrt();
    let ln_k = ln_bessel_k(order, u).expect("bessel argument is positive");
    -0.5 * d * (2.0 * PI).ln() + (2.0 / lambda).ln() + ln_k - order * (0.5 * lambda * q).sqrt().ln()
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Shared Gaussian-style parametrization: mean, Cholesky factor and `ln det Σ`.
#[derive(Debug, Clone)]
struct EllipticalParams {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    ln_det: f64,
}

impl EllipticalParams {
    fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        check_dim(mean.len(), covariance.nrows())?;
        let stats = SampleStats::from_moments(mean, covariance, RidgePolicy::Off)?;
        Ok(Self::from_stats(&stats))
    }

    fn from_stats(stats: &SampleStats) -> Self {
        EllipticalParams {
            mean: stats.mean.clone(),
            covariance: stats.covariance.clone(),
            chol_l: stats.cholesky().l(),
            ln_det: stats.ln_det(),
        }
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(x-μ)ᵀ Σ⁻¹ (x-μ)` by forward substitution against `L`.
    fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut w = [0.0_f64; 16];
        let mut heap;
        let w: &mut [f64] = if d <= 16 {
            &mut w[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut acc = 0.0;
        for r in 0..d {
            let mut s = x[r] - self.mean[r];
            for c in 0..r {
                s -= self.chol_l[(r, c)] * w[c];
            }
            let v = s / self.chol_l[(r, r)];
            w[r] = v;
            acc += v * v;
        }
        acc
    }

    /// `μ + scale · L z` into `out`, where `z` is already in `out`.
    fn affine_in_place(&self, scale: f64, out: &mut [f64]) {
        let d = self.dim();
        for r in (0..d).rev() {
            let mut s = 0.0;
            for c in 0..=r {
                s += self.chol_l[(r, c)] * out[c];
            }
            out[r] = self.mean[r] + scale * s;
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultivariateLaplace {
    params: EllipticalParams,
    lambda: f64,
}

impl MultivariateLaplace {
    /// Fails with `SingularCovariance` unless `Σ` is positive definite.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Ok(Self::from_params(EllipticalParams::new(mean, covariance)?))
    }

    pub fn from_stats(stats: &SampleStats) -> Self {
        Self::from_params(EllipticalParams::from_stats(stats))
    }

    /// Zero mean, identity covariance.
    pub fn standard(dim: usize) -> Self {
        Self::new(DVector::zeros(dim), DMatrix::identity(dim, dim)).expect("identity is positive definite")
    }

    fn from_params(params: EllipticalParams) -> Self {
        let lambda = (params.ln_det / params.dim() as f64).exp();
        MultivariateLaplace { params, lambda }
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.params.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.params.covariance
    }

    /// `det(Σ)^{1/d}`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn ln_det(&self) -> f64 {
        self.params.ln_det
    }

    /// `q(x) = λ (x-μ)ᵀ Σ⁻¹ (x-μ)`.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.lambda * self.params.mahalanobis_sq(x))
    }

    pub fn ln_pdf(&self, x: &[f64]) -> Result<f64> {
        let q = self.quadratic_form(x)?;
        Ok(laplace_ln_density_from_q(self.dim(), self.lambda, q))
    }

    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        Ok(self.ln_pdf(x)?.exp())
    }

    /// `m` draws as an `m × d` matrix, reproducible from `seed`.
    pub fn sample(&self, m: usize, seed: u64) -> DMatrix<f64> {
        let d = self.dim();
        let mut rng = crate::seed::rng(seed);
        let mut out = DMatrix::zeros(m, d);
        let mut row = vec![0.0; d];
        for i in 0..m {
            self.draw_into(&mut rng, &mut row);
            for (k, v) in row.iter().enumerate() {
                out[(i, k)] = *v;
            }
        }
        out
    }
}

impl Density for MultivariateLaplace {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        laplace_ln_density_from_q(self.dim(), self.lambda, self.lambda * self.params.mahalanobis_sq(x))
    }

    /// Draw order is `W` first, then `z_1..z_d`.
    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let w: f64 = rng.sample(Exp1);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        self.params.affine_in_place(w.sqrt(), out);
    }
}

#[derive(Debug, Clone)]
pub struct MultivariateNormal {
    params: EllipticalParams,
}

impl MultivariateNormal {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        Ok(MultivariateNormal {
            params: EllipticalParams::new(mean, covariance)?,
        })
    }

    pub fn from_stats(stats: &SampleStats) -> Self {
        MultivariateNormal {
            params: EllipticalParams::from_stats(stats),
        }
    }

    /// Closed-form entropy `(d/2) ln(2πe) + ½ ln det Σ`.
    pub fn entropy(&self) -> f64 {
        gaussian_entropy(self.params.dim(), self.params.ln_det)
    }

    pub fn ln_pdf(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.params.dim(), x.len())?;
        Ok(self.ln_density(x))
    }
}

pub(crate) fn gaussian_entropy(dim: usize, ln_det: f64) -> f64 {
    0.5 * dim as f64 * (2.0 * PI * std::f64::consts::E).ln() + 0.5 * ln_det
}

impl Density for MultivariateNormal {
    fn dim(&self) -> usize {
        self.params.dim()
    }

    fn ln_density(&self, x: &[f64]) -> f64 {
        let d = self.params.dim() as f64;
        -0.5 * (d * (2.0 * PI).ln() + self.params.ln_det + self.params.mahalanobis_sq(x))
    }

    fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        self.params.affine_in_place(1.0, out);
    }
}

/// Histogram density estimate on uniform bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    bin_edges: Vec<f64>,
    densities: Vec<f64>,
}

pub const MIN_BINS: usize = 24;
pub const MAX_BINS: usize = 256;

impl EmpiricalDistribution {
    pub fn new(bin_edges: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if densities.is_empty() {
            return Err(Error::EmptyHistogram);
        }
        if bin_edges.len() != densities.len() + 1 {
            return Err(Error::InvalidHistogram(format!(
                "{} edges for {} bins",
                bin_edges.len(),
                densities.len()
            )));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) || bin_edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidHistogram(
                "edges must be finite and strictly increasing".into(),
            ));
        }
        if densities.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
            return Err(Error::InvalidHistogram(
                "densities must be finite and nonnegative".into(),
            ));
        }
        let hist = EmpiricalDistribution { bin_edges, densities };
        let mass = hist.mass();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidHistogram(format!("total mass {mass} != 1")));
        }
        Ok(hist)
    }

    /// Freedman–Diaconis binning, bin count clipped to `[24, 256]`.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyHistogram);
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidHistogram("non-finite sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        if !(hi > lo) {
            return Err(Error::InvalidHistogram("samples have zero range".into()));
        }
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        let n = sorted.len() as f64;
        let width = 2.0 * iqr / n.cbrt();
        let bins = if width > 0.0 {
            ((hi - lo) / width).ceil() as usize
        } else {
            MAX_BINS
        }
        .clamp(MIN_BINS, MAX_BINS);
        let step = (hi - lo) / bins as f64;
        let mut bin_edges: Vec<f64> = (0..=bins).map(|k| lo + step * k as f64).collect();
        bin_edges[bins] = hi;
        let mut counts = vec![0usize; bins];
        for &v in &sorted {
            let k = (((v - lo) / step) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let densities = counts
            .iter()
            .zip(bin_edges.windows(2))
            .map(|(&c, w)| c as f64 / (n * (w[1] - w[0])))
            .collect();
        Self::new(bin_edges, densities)
    }

    /// Bins on `edges` holding the model density at each bin centre.
    pub fn from_model_centres(bin_edges: Vec<f64>, model: &UnivariateModel) -> Result<Self> {
        let densities = bin_edges.windows(2).map(|w| model.pdf(0.5 * (w[0] + w[1]))).collect();
        Self::new(bin_edges, densities)
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn n_bins(&self) -> usize {
        self.densities.len()
    }

    pub fn centres(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|w| w[1] - w[0])
    }

    pub fn mass(&self) -> f64 {
        self.densities.iter().zip(self.widths()).map(|(d, w)| d * w).sum()
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Relative l1 error `‖p_emp − p_model‖ / ‖p_emp‖` with the model evaluated at bin centres.
pub fn fit_error_l1(emp: &EmpiricalDistribution, model: &UnivariateModel) -> Result<f64> {
    let norm: f64 = emp.densities().iter().zip(emp.widths()).map(|(d, w)| d.abs() * w).sum();
    if !(norm > 0.0) {
        return Err(Error::EmptyHistogram);
    }
    let diff: f64 = emp
        .densities()
        .iter()
        .zip(emp.centres())
        .zip(emp.widths())
        .map(|((d, c), w)| (d - model.pdf(c)).abs() * w)
        .sum();
    Ok(diff / norm)
}
