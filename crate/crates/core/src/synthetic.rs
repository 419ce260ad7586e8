//! Synthetic processes with planted coupling graphs.
//!
//! [`generate_var`] runs `x_t = A x_{t-1} + η_t`; [`generate_contemporaneous`]
//! draws every sample independently from a linear structural model over a
//! DAG, which is the setting where equal-time direct edges are ground truth.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{UnivariateModel, UNIT_LAPLACE_SCALE};
use crate::error::{Error, Result};
use crate::seed::{self, TAG_GENERATOR};
use crate::series::{Axis, ChannelId, TimeSeriesMatrix, DEFAULT_SAMPLE_RATE_HZ};
use crate::spatial::SensorGrid;

pub const BURN_IN: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Innovation {
    Gaussian,
    Laplace,
}

impl Innovation {
    /// Unit-variance draw.
    fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Innovation::Gaussian => rng.sample(StandardNormal),
            Innovation::Laplace => UnivariateModel::Laplace {
                mean: 0.0,
                scale: UNIT_LAPLACE_SCALE,
            }
            .draw(rng),
        }
    }
}

/// Directed coupling `source → target` with weight `w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

impl Coupling {
    pub fn new(source: usize, target: usize, weight: f64) -> Self {
        Coupling { source, target, weight }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_channels: usize,
    /// Number of samples returned.
    pub t: usize,
    pub coupling: Vec<Coupling>,
    pub innovation: Innovation,
    /// Innovation standard deviation.
    pub noise_scale: f64,
    pub seed: u64,
    /// Channels are labelled `s1..sN` on this axis.
    #[serde(default = "default_axis")]
    pub axis: Axis,
    /// Sensor numbers for the channels; `1..=N` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensors: Option<Vec<u32>>,
}

fn default_axis() -> Axis {
    Axis::Lateral
}

impl GeneratorSpec {
    pub fn new(n_channels: usize, t: usize, innovation: Innovation, seed: u64) -> Self {
        GeneratorSpec {
            n_channels,
            t,
            coupling: Vec::new(),
            innovation,
            noise_scale: 1.0,
            seed,
            axis: Axis::Lateral,
            sensors: None,
        }
    }

    pub fn with_coupling(mut self, coupling: Vec<Coupling>) -> Self {
        self.coupling = coupling;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::NoChannels);
        }
        if self.t < 2 {
            return Err(Error::TooFewSamples { min: 2, got: self.t });
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "noise_scale {} must be positive",
                self.noise_scale
            )));
        }
        for c in &self.coupling {
            for idx in [c.source, c.target] {
                if idx >= self.n_channels {
                    return Err(Error::ChannelOutOfRange {
                        index: idx,
                        n: self.n_channels,
                    });
                }
            }
            if !c.weight.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "coupling {} -> {} has non-finite weight",
                    c.source, c.target
                )));
            }
        }
        if let Some(s) = &self.sensors {
            if s.len() != self.n_channels {
                return Err(Error::DimensionMismatch {
                    expected: self.n_channels,
                    got: s.len(),
                });
            }
        }
        Ok(())
    }

    /// `A[(target, source)] = weight`, summing duplicates.
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_channels, self.n_channels);
        for c in &self.coupling {
            a[(c.target, c.source)] += c.weight;
        }
        a
    }

    fn channel_ids(&self) -> Vec<ChannelId> {
        match &self.sensors {
            Some(s) => s.iter().map(|&k| ChannelId::new(k, self.axis)).collect(),
            None => (1..=self.n_channels as u32)
                .map(|k| ChannelId::new(k, self.axis))
                .collect(),
        }
    }

    fn finish(&self, columns: Vec<Vec<f64>>) -> Result<TimeSeriesMatrix> {
        TimeSeriesMatrix::new(columns, self.channel_ids(), DEFAULT_SAMPLE_RATE_HZ)?.standardize()
    }
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Vector autoregression of order one; output columns are standardized.
pub fn generate_var(spec: &GeneratorSpec) -> Result<TimeSeriesMatrix> {
    spec.validate()?;
    let a = spec.coupling_matrix();
    let rho = spectral_radius(&a);
    if rho >= 1.0 {
        return Err(Error::UnstableSpec(rho));
    }
    let n = spec.n_channels;
    let mut rng = seed::rng(seed::derive(spec.seed, &[TAG_GENERATOR, 1]));
    let mut state = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut columns = vec![Vec::with_capacity(spec.t); n];
    for step in 0..BURN_IN + spec.t {
        for (r, slot) in next.iter_mut().enumerate() {
            let drift: f64 = (0..n).map(|c| a[(r, c)] * state[c]).sum();
            *slot = drift + spec.noise_scale * spec.innovation.draw(&mut rng);
        }
        std::mem::swap(&mut state, &mut next);
        if step >= BURN_IN {
            for (col, &v) in columns.iter_mut().zip(&state) {
                col.push(v);
            }
        }
    }
    spec.finish(columns)
}

/// Kahn's algorithm; ties resolved by lowest index.
pub fn topological_order(n: usize, coupling: &[Coupling]) -> Result<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for c in coupling {
        indeg[c.target] += 1;
        children[c.source].push(c.target);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&k| indeg[k] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(k) = ready.pop_first() {
        order.push(k);
        for &ch in &children[k] {
            indeg[ch] -= 1;
            if indeg[ch] == 0 {
                ready.insert(ch);
            }
        }
    }
    if order.len() != n {
        return Err(Error::CyclicGraph);
    }
    Ok(order)
}

/// Linear structural model over a DAG, one independent draw per sample;
/// output columns are standardized.
pub fn generate_contemporaneous(spec: &GeneratorSpec) -> Result<TimeSeriesMatrix> {
    spec.validate()?;
    let n = spec.n_channels;
    let order = topological_order(n, &spec.coupling)?;
    let mut parents: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for c in &spec.coupling {
        parents[c.target].push((c.source, c.weight));
    }
    let mut rng = seed::rng(seed::derive(spec.seed, &[TAG_GENERATOR, 2]));
    let mut columns = vec![vec![0.0; spec.t]; n];
    let mut row = vec![0.0; n];
    for t in 0..spec.t {
        for &j in &order {
            let drive: f64 = parents[j].iter().map(|&(k, w)| w * row[k]).sum();
            row[j] = drive + spec.noise_scale * spec.innovation.draw(&mut rng);
        }
        for (col, &v) in columns.iter_mut().zip(&row) {
            col[t] = v;
        }
    }
    spec.finish(columns)
}

/// Random DAG: a random node order, then each forward pair is an edge with
/// probability `p`, all with weight `weight`.
pub fn random_dag(n: usize, p: f64, weight: f64, seed: u64) -> Vec<Coupling> {
    let mut rng = seed::rng(seed::derive(seed, &[TAG_GENERATOR, 3]));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                edges.push(Coupling::new(order[a], order[b], weight));
            }
        }
    }
    edges
}

/// DAG on a sensor grid: every neighbor pair coupled from the lower to the
/// higher sensor index. Channel `k` is the `k`-th sensor of the grid in
/// ascending order.
pub fn lattice_coupling(grid: &SensorGrid, weight: f64) -> Vec<Coupling> {
    let sensors = grid.sensors();
    let pos = |s: u32| sensors.binary_search(&s).expect("sensor from grid");
    grid.neighbor_pairs()
        .into_iter()
        .map(|(a, b)| Coupling::new(pos(a), pos(b), weight))
        .collect()
}

/// Undirected pair set `(min, max)`.
pub fn skeleton(edges: impl IntoIterator<Item = (usize, usize)>) -> BTreeSet<(usize, usize)> {
    edges
        .into_iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect()
}

/// Skeleton plus every pair of nodes sharing a child.
pub fn moral_skeleton(coupling: &[Coupling]) -> BTreeSet<(usize, usize)> {
    let mut out = skeleton(coupling.iter().map(|c| (c.source, c.target)));
    let targets: BTreeSet<usize> = coupling.iter().map(|c| c.target).collect();
    for t in targets {
        let ps: Vec<usize> = coupling.iter().filter(|c| c.target == t).map(|c| c.source).collect();
        for (k, &a) in ps.iter().enumerate() {
            for &b in &ps[k + 1..] {
                if a != b {
                    out.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeScore {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl EdgeScore {
    pub fn compare(predicted: &BTreeSet<(usize, usize)>, truth: &BTreeSet<(usize, usize)>) -> Self {
        let tp = predicted.intersection(truth).count();
        EdgeScore {
            true_positives: tp,
            false_positives: predicted.len() - tp,
            false_negatives: truth.len() - tp,
        }
    }

    /// 1 when nothing was predicted.
    pub fn precision(&self) -> f64 {
        let p = self.true_positives + self.false_positives;
        if p == 0 {
            1.0
        } else {
            self.true_positives as f64 / p as f64
        }
    }

    /// 1 when there is nothing to find.
    pub fn recall(&self) -> f64 {
        let t = self.true_positives + self.false_negatives;
        if t == 0 {
            1.0
        } else {
            self.true_positives as f64 / t as f64
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag1(x: &[f64]) -> f64 {
        let n = x.len();
        let m = x.iter().sum::<f64>() / n as f64;
        let num: f64 = (1..n).map(|t| (x[t] - m) * (x[t - 1] - m)).sum();
        let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        num / den
    }

    fn excess_kurtosis(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let m4 = x.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
        m4 / (m2 * m2) - 3.0
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let saa: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let sbb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn var_without_coupling_is_white() {
        let g = generate_var(&GeneratorSpec::new(2, 100_000, Innovation::Gaussian, 5)).unwrap();
        for k in 0..2 {
            assert!(lag1(g.column(k)).abs() < 0.02);
        }
    }

    #[test]
    fn laplace_innovations_have_heavy_tails() {
        let lap = generate_var(&GeneratorSpec::new(1, 100_000, Innovation::Laplace, 8)).unwrap();
        let gau = generate_var(&GeneratorSpec::new(1, 100_000, Innovation::Gaussian, 8)).unwrap();
        let kl = excess_kurtosis(lap.column(0));
        let kg = excess_kurtosis(gau.column(0));
        assert!((kl - 3.0).abs() < 0.4, "laplace kurtosis {kl}");
        assert!(kg.abs() < 0.1, "gaussian kurtosis {kg}");
    }

    #[test]
    fn unstable_var_is_rejected() {
        let spec = GeneratorSpec::new(2, 100, Innovation::Gaussian, 1)
            .with_coupling(vec![Coupling::new(0, 1, 1.5), Coupling::new(1, 0, 1.5)]);
        assert!(matches!(generate_var(&spec), Err(Error::UnstableSpec(r)) if (r - 1.5).abs() < 1e-12));
        // nilpotent: radius 0 despite a large weight
        let spec = GeneratorSpec::new(2, 100, Innovation::Gaussian, 1).with_coupling(vec![Coupling::new(0, 1, 5.0)]);
        assert!(generate_var(&spec).is_ok());
    }

    #[test]
    fn outputs_are_standardized_and_deterministic() {
        let spec = GeneratorSpec::new(3, 2000, Innovation::Laplace, 11)
            .with_coupling(vec![Coupling::new(0, 1, 0.5), Coupling::new(1, 2, 0.4)]);
        let a = generate_var(&spec).unwrap();
        let b = generate_var(&spec).unwrap();
        assert_eq!(a, b);
        let again = a.standardize().unwrap();
        for k in 0..3 {
            for (x, y) in a.column(k).iter().zip(again.column(k)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let c = generate_contemporaneous(&spec).unwrap();
        assert_eq!(c, generate_contemporaneous(&spec).unwrap());
    }

    #[test]
    fn cycles_are_rejected() {
        let spec = GeneratorSpec::new(3, 10, Innovation::Gaussian, 1).with_coupling(vec![
            Coupling::new(0, 1, 0.5),
            Coupling::new(1, 2, 0.5),
            Coupling::new(2, 0, 0.5),
        ]);
        assert!(matches!(generate_contemporaneous(&spec), Err(Error::CyclicGraph)));
        let self_loop =
            GeneratorSpec::new(1, 10, Innovation::Gaussian, 1).with_coupling(vec![Coupling::new(0, 0, 0.5)]);
        assert!(matches!(generate_contemporaneous(&self_loop), Err(Error::CyclicGraph)));
    }

    #[test]
    fn star_leaf_correlation_matches_weights() {
        // leaf = 0.8 hub + e  =>  rho = 0.8 / sqrt(1.64)
        let spec = GeneratorSpec::new(3, 100_000, Innovation::Gaussian, 2)
            .with_coupling(vec![Coupling::new(0, 1, 0.8), Coupling::new(0, 2, 0.8)]);
        let g = generate_contemporaneous(&spec).unwrap();
        let want = 0.8 / 1.64f64.sqrt();
        assert!((corr(g.column(0), g.column(1)) - want).abs() < 0.01);
        // leaves share only the hub: rho^2
        assert!((corr(g.column(1), g.column(2)) - want * want).abs() < 0.01);
    }

    #[test]
    fn random_dag_is_acyclic_and_dense_as_asked() {
        let mut total = 0;
        for s in 0..50 {
            let e = random_dag(12, 0.15, 0.6, s);
            assert!(topological_order(12, &e).is_ok());
            total += e.len();
        }
        let mean = total as f64 / 50.0;
        assert!((mean - 9.9).abs() < 1.5, "mean edges {mean}");
    }

    #[test]
    fn scoring() {
        let truth = skeleton([(0, 1), (2, 1)]);
        let pred = skeleton([(1, 0), (0, 2)]);
        let s = EdgeScore::compare(&pred, &truth);
        assert_eq!((s.true_positives, s.false_positives, s.false_negatives), (1, 1, 1));
        assert_eq!(s.precision(), 0.5);
        let moral = moral_skeleton(&[Coupling::new(0, 1, 1.0), Coupling::new(2, 1, 1.0)]);
        assert!(moral.contains(&(0, 2)));
        assert_eq!(EdgeScore::compare(&BTreeSet::new(), &truth).precision(), 1.0);
    }
}
