//! Greedy discovery / removal of direct interaction partners with permutation
//! shuffle tests.
//!
//! For a target channel `i`, discovery repeatedly admits the channel with the
//! largest `I(X_i; X_j | X_K)` as long as it passes the shuffle test; removal
//! then makes one pass over the admitted set, in admission order, dropping
//! every channel whose contribution given the remaining ones fails the test.
//! All quantities are contemporaneous (no lags).

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Estimator, EstimatorConfig, Family};
use crate::seed::{self, TAG_SHUFFLE};
use crate::series::{ChannelId, TimeSeriesMatrix};

pub const DEFAULT_THETA: f64 = 0.1;
pub const DEFAULT_SHUFFLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmiiConfig {
    pub theta: f64,
    pub n_shuffles: usize,
    pub estimator: EstimatorConfig,
    pub seed: u64,
}

impl OmiiConfig {
    /// `θ = 0.1`, `Ns = 100`; the estimator shares the top-level seed.
    pub fn new(family: Family, seed: u64) -> Self {
        OmiiConfig {
            theta: DEFAULT_THETA,
            n_shuffles: DEFAULT_SHUFFLES,
            estimator: EstimatorConfig::new(family, seed),
            seed,
        }
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_shuffles(mut self, n: usize) -> Self {
        self.n_shuffles = n;
        self
    }

    pub fn with_mc_samples(mut self, m: usize) -> Self {
        self.estimator.mc_samples = m;
        self
    }

    /// `⌊(1-θ)·Ns⌋`: the null value at this ascending rank is the threshold.
    pub fn threshold_rank(&self) -> usize {
        ((1.0 - self.theta) * self.n_shuffles as f64 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(Error::InvalidConfig(format!("theta {} must lie in (0, 1)", self.theta)));
        }
        if self.n_shuffles == 0 {
            return Err(Error::InvalidConfig("n_shuffles must be positive".into()));
        }
        let rank = self.threshold_rank();
        if rank < 1 || rank > self.n_shuffles {
            return Err(Error::InvalidConfig(format!(
                "floor((1 - theta) * Ns) = {rank} is outside [1, {}]",
                self.n_shuffles
            )));
        }
        self.estimator.validate()
    }
}

/// Which procedure requested a shuffle test; part of the permutation seed so
/// the removal pass never replays the permutations used at admission.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Discovery,
    Removal,
    Standalone,
}

impl Stage {
    fn tag(self) -> u64 {
        match self {
            Stage::Discovery => 1,
            Stage::Removal => 2,
            Stage::Standalone => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuffleOutcome {
    pub passed: bool,
    /// `I(X_i; X_j | X_K)` on the unshuffled data.
    pub statistic: f64,
    /// Null value at ascending rank `⌊(1-θ)Ns⌋`.
    pub threshold: f64,
    #[serde(skip)]
    pub null_values: Vec<f64>,
}

/// Direct partners of one target, in admission order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentSet {
    pub target: usize,
    pub parents: Vec<usize>,
    pub cmi_at_admission: Vec<f64>,
    pub admission_tests: Vec<ShuffleOutcome>,
}

impl ParentSet {
    pub fn empty(target: usize) -> Self {
        ParentSet {
            target,
            parents: Vec::new(),
            cmi_at_admission: Vec::new(),
            admission_tests: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    fn push(&mut self, parent: usize, outcome: ShuffleOutcome) {
        self.parents.push(parent);
        self.cmi_at_admission.push(outcome.statistic);
        self.admission_tests.push(outcome);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: ChannelId,
    pub target: ChannelId,
    /// CMI at admission, nats.
    pub weight: f64,
    /// Shuffle threshold the weight had to beat.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkMetadata {
    pub theta: f64,
    pub n_shuffles: usize,
    pub family: Family,
    pub mc_samples: usize,
    pub estimator_seed: u64,
    pub seed: u64,
    pub samples: usize,
}

/// Directed network with an edge `parent → target` for every surviving parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionNetwork {
    pub nodes: Vec<ChannelId>,
    pub edges: Vec<Edge>,
    pub metadata: NetworkMetadata,
}

impl InteractionNetwork {
    pub fn edge_set(&self) -> BTreeSet<(ChannelId, ChannelId)> {
        self.edges.iter().map(|e| (e.source, e.target)).collect()
    }

    /// Edges with direction dropped, each as `(min, max)`.
    pub fn skeleton(&self) -> BTreeSet<(ChannelId, ChannelId)> {
        self.edges
            .iter()
            .map(|e| (e.source.min(e.target), e.source.max(e.target)))
            .collect()
    }

    pub fn parents_of(&self, target: ChannelId) -> Vec<ChannelId> {
        self.edges
            .iter()
            .filter(|e| e.target == target)
            .map(|e| e.source)
            .collect()
    }

    /// Graphviz rendering; edge labels carry the admission CMI.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph omii {\n");
        for n in &self.nodes {
            out.push_str(&format!("  \"{n}\";\n"));
        }
        for e in &self.edges {
            out.push_str(&format!(
                "  \"{}\" -> \"{}\" [weight={:.6}, label=\"{:.4}\"];\n",
                e.source, e.target, e.weight, e.weight
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Runs the shuffle test, discovery, removal and full-network inference on one matrix.
pub struct OmiiEngine<'a> {
    x: &'a TimeSeriesMatrix,
    cfg: OmiiConfig,
    estimator: Estimator,
}

impl<'a> OmiiEngine<'a> {
    pub fn new(x: &'a TimeSeriesMatrix, cfg: OmiiConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(OmiiEngine {
            x,
            cfg,
            estimator: Estimator::new(cfg.estimator)?,
        })
    }

    pub fn config(&self) -> &OmiiConfig {
        &self.cfg
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    fn permutation_seed(&self, stage: Stage, i: usize, j: usize, cond: &[usize], shuffle: usize) -> u64 {
        let mut sorted = cond.to_vec();
        sorted.sort_unstable();
        let mut key = vec![TAG_SHUFFLE, stage.tag(), i as u64, j as u64, sorted.len() as u64];
        key.extend(sorted.iter().map(|&k| k as u64));
        key.push(shuffle as u64);
        seed::derive(self.cfg.seed, &key)
    }

    fn check_pair(&self, i: usize, j: usize, cond: &[usize]) -> Result<()> {
        self.x.check_index(i)?;
        self.x.check_index(j)?;
        if i == j {
            return Err(Error::InvalidSubset(format!("target and candidate are both {i}")));
        }
        if cond.contains(&i) || cond.contains(&j) {
            return Err(Error::InvalidSubset("conditioning set contains the tested pair".into()));
        }
        Ok(())
    }

    fn cmi(&self, i: usize, j: usize, cond: &[usize]) -> Result<f64> {
        Ok(self.estimator.conditional_mutual_information(self.x, i, j, cond)?.value)
    }

    /// Level-θ permutation test of `I(X_i; X_j | X_K) > 0`. Only channel `j`
    /// is permuted; the target and the conditioning channels stay aligned.
    pub fn shuffle_test(&self, i: usize, j: usize, cond: &[usize], stage: Stage) -> Result<ShuffleOutcome> {
        self.check_pair(i, j, cond)?;
        let statistic = self.cmi(i, j, cond)?;
        let source = self.x.column(j);
        let t = source.len();
        let mut null_values = (0..self.cfg.n_shuffles)
            .into_par_iter()
            .map(|l| {
                let mut perm: Vec<usize> = (0..t).collect();
                perm.shuffle(&mut seed::rng(self.permutation_seed(stage, i, j, cond, l)));
                let shuffled: Vec<f64> = perm.iter().map(|&p| source[p]).collect();
                let mut cols: Vec<(usize, &[f64])> = Vec::with_capacity(cond.len() + 2);
                cols.push((i, self.x.column(i)));
                cols.push((j, &shuffled));
                cols.extend(cond.iter().map(|&k| (k, self.x.column(k))));
                self.estimator.cmi_columns(&cols).map(|e| e.value)
            })
            .collect::<Result<Vec<f64>>>()?;
        null_values.sort_by(f64::total_cmp);
        let threshold = null_values[self.cfg.threshold_rank() - 1];
        Ok(ShuffleOutcome {
            passed: statistic > threshold,
            statistic,
            threshold,
            null_values,
        })
    }

    /// Greedy forward selection of direct partners of `target`.
    pub fn discover(&self, target: usize) -> Result<ParentSet> {
        self.x.check_index(target)?;
        let n = self.x.n_channels();
        let mut found = ParentSet::empty(target);
        loop {
            let candidates: Vec<usize> = (0..n).filter(|&j| j != target && !found.parents.contains(&j)).collect();
            if candidates.is_empty() {
                break;
            }
            let scores = candidates
                .par_iter()
                .map(|&j| self.cmi(target, j, &found.parents))
                .collect::<Result<Vec<f64>>>()?;
            // ascending scan keeps the lowest index on ties
            let mut best = 0;
            for k in 1..scores.len() {
                if scores[k] > scores[best] {
                    best = k;
                }
            }
            let pick = candidates[best];
            let outcome = self.shuffle_test(target, pick, &found.parents, Stage::Discovery)?;
            if !outcome.passed {
                break;
            }
            found.push(pick, outcome);
        }
        Ok(found)
    }

    /// Single pass over `found` in admission order, dropping every parent that
    /// fails the shuffle test conditioned on the parents still retained.
    pub fn remove(&self, found: &ParentSet) -> Result<ParentSet> {
        let target = found.target;
        let mut kept: Vec<usize> = found.parents.clone();
        for &j in &found.parents {
            let rest: Vec<usize> = kept.iter().copied().filter(|&k| k != j).collect();
            if !self.shuffle_test(target, j, &rest, Stage::Removal)?.passed {
                kept = rest;
            }
        }
        let mut out = ParentSet::empty(target);
        for (k, &p) in found.parents.iter().enumerate() {
            if kept.contains(&p) {
                out.push(p, found.admission_tests[k].clone());
            }
        }
        Ok(out)
    }

    pub fn parents(&self, target: usize) -> Result<ParentSet> {
        self.remove(&self.discover(target)?)
    }

    /// Discovery then removal for every channel.
    pub fn infer_network(&self) -> Result<InteractionNetwork> {
        let results: Vec<Result<ParentSet>> = (0..self.x.n_channels())
            .into_par_iter()
            .map(|i| self.parents(i))
            .collect();
        let channels = self.x.channels();
        let mut failures = Vec::new();
        let mut edges = Vec::new();
        for (i, res) in results.into_iter().enumerate() {
            match res {
                Ok(ps) => {
                    for (k, &p) in ps.parents.iter().enumerate() {
                        edges.push(Edge {
                            source: channels[p],
                            target: channels[i],
                            weight: ps.cmi_at_admission[k],
                            threshold: ps.admission_tests[k].threshold,
                        });
                    }
                }
                Err(e) => failures.push((channels[i], e.to_string())),
            }
        }
        if !failures.is_empty() {
            return Err(Error::TargetFailures(failures));
        }
        Ok(InteractionNetwork {
            nodes: channels.to_vec(),
            edges,
            metadata: NetworkMetadata {
                theta: self.cfg.theta,
                n_shuffles: self.cfg.n_shuffles,
                family: self.cfg.estimator.family,
                mc_samples: self.cfg.estimator.mc_samples,
                estimator_seed: self.cfg.estimator.seed,
                seed: self.cfg.seed,
                samples: self.x.len(),
            },
        })
    }
}

/// In- and out-degree per node plus normalized histograms indexed by degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    pub in_degree: BTreeMap<ChannelId, usize>,
    pub out_degree: BTreeMap<ChannelId, usize>,
    pub in_histogram: Vec<f64>,
    pub out_histogram: Vec<f64>,
}

pub fn degree_distribution(net: &InteractionNetwork) -> DegreeDistribution {
    let mut in_degree: BTreeMap<ChannelId, usize> = net.nodes.iter().map(|n| (*n, 0)).collect();
    let mut out_degree = in_degree.clone();
    for e in &net.edges {
        *in_degree.entry(e.target).or_default() += 1;
        *out_degree.entry(e.source).or_default() += 1;
    }
    let hist = |deg: &BTreeMap<ChannelId, usize>| -> Vec<f64> {
        let max = deg.values().copied().max().unwrap_or(0);
        let mut h = vec![0.0; max + 1];
        if deg.is_empty() {
            return h;
        }
        for &d in deg.values() {
            h[d] += 1.0;
        }
        let n = deg.len() as f64;
        h.iter_mut().for_each(|v| *v /= n);
        h
    };
    DegreeDistribution {
        in_histogram: hist(&in_degree),
        out_histogram: hist(&out_degree),
        in_degree,
        out_degree,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn independent(n: usize, t: usize, seed: u64) -> TimeSeriesMatrix {
        let mut rng = crate::seed::rng(seed);
        let cols = (0..n)
            .map(|_| (0..t).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        TimeSeriesMatrix::from_columns(cols).unwrap()
    }

    #[test]
    fn config_validation() {
        let base = OmiiConfig::new(Family::Gaussian, 1);
        assert!(base.validate().is_ok());
        assert_eq!(base.threshold_rank(), 90);
        assert!(base.with_theta(0.0).validate().is_err());
        assert!(base.with_theta(1.0).validate().is_err());
        assert!(base.with_shuffles(0).validate().is_err());
        // floor((1 - θ) Ns) = 0
        assert!(base.with_shuffles(1).with_theta(0.5).validate().is_err());
        assert_eq!(base.with_shuffles(10).with_theta(0.3).threshold_rank(), 7);
    }

    #[test]
    fn two_shuffle_threshold_is_the_smaller_null_value() {
        let x = independent(2, 200, 4);
        let cfg = OmiiConfig::new(Family::Gaussian, 3).with_shuffles(2).with_theta(0.5);
        let engine = OmiiEngine::new(&x, cfg).unwrap();
        let out = engine.shuffle_test(0, 1, &[], Stage::Standalone).unwrap();
        assert_eq!(out.null_values.len(), 2);
        assert_eq!(out.threshold, out.null_values[0].min(out.null_values[1]));
        assert_eq!(out.passed, out.statistic > out.threshold);
    }

    #[test]
    fn shuffle_test_rejects_bad_arguments() {
        let x = independent(3, 50, 1);
        let engine = OmiiEngine::new(&x, OmiiConfig::new(Family::Gaussian, 1).with_shuffles(10)).unwrap();
        assert!(engine.shuffle_test(0, 0, &[], Stage::Standalone).is_err());
        assert!(engine.shuffle_test(0, 1, &[1], Stage::Standalone).is_err());
        assert!(engine.shuffle_test(0, 5, &[], Stage::Standalone).is_err());
    }

    #[test]
    fn removal_of_empty_set_is_empty() {
        let x = independent(3, 50, 1);
        let engine = OmiiEngine::new(&x, OmiiConfig::new(Family::Gaussian, 1).with_shuffles(10)).unwrap();
        let out = engine.remove(&ParentSet::empty(2)).unwrap();
        assert!(out.is_empty() && out.target == 2);
    }

    #[test]
    fn degree_histograms() {
        let nodes: Vec<ChannelId> = (1..=4).map(ChannelId::lateral).collect();
        let meta = NetworkMetadata {
            theta: 0.1,
            n_shuffles: 100,
            family: Family::Gaussian,
            mc_samples: 1000,
            estimator_seed: 0,
            seed: 0,
            samples: 10,
        };
        let empty = InteractionNetwork {
            nodes: nodes.clone(),
            edges: vec![],
            metadata: meta.clone(),
        };
        let d = degree_distribution(&empty);
        assert_eq!(d.in_histogram, vec![1.0]);
        assert_eq!(d.out_histogram, vec![1.0]);

        let star = InteractionNetwork {
            nodes: nodes.clone(),
            edges: (1..4)
                .map(|k| Edge {
                    source: nodes[0],
                    target: nodes[k],
                    weight: 0.5,
                    threshold: 0.0,
                })
                .collect(),
            metadata: meta,
        };
        let d = degree_distribution(&star);
        assert_eq!(d.out_degree[&nodes[0]], 3);
        assert_eq!(d.out_histogram, vec![0.75, 0.0, 0.0, 0.25]);
        assert_eq!(d.in_histogram, vec![0.25, 0.75]);
        assert!((d.in_histogram.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(star.to_dot().contains("\"s1_lat\" -> \"s2_lat\""));
    }
}
