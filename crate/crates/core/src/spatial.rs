//! Sensor grid geometry, nearest-neighbor MI maps and scenario differencing.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Estimator, Family};
use crate::omii::InteractionNetwork;
use crate::series::{Axis, ChannelId, TimeSeriesMatrix};

pub const LATERAL_SPACING_M: f64 = 2.13;
pub const LONGITUDINAL_SPACING_M: f64 = 1.96;

const BUNDLED_LAYOUT: &str = include_str!("../data/grid_30.csv");

/// Sensor positions on an integer grid. Gaps are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorGrid {
    positions: BTreeMap<u32, (i64, i64)>,
    pub lateral_spacing_m: f64,
    pub longitudinal_spacing_m: f64,
}

#[derive(Debug, Deserialize)]
struct LayoutRow {
    sensor_index: u32,
    row: i64,
    col: i64,
}

impl SensorGrid {
    pub fn new(positions: BTreeMap<u32, (i64, i64)>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidGrid("no sensors".into()));
        }
        if positions.contains_key(&0) {
            return Err(Error::InvalidGrid("sensor indices start at 1".into()));
        }
        let mut seen = BTreeSet::new();
        for (s, p) in &positions {
            if !seen.insert(*p) {
                return Err(Error::InvalidGrid(format!("sensor {s} shares position {p:?}")));
            }
        }
        Ok(SensorGrid {
            positions,
            lateral_spacing_m: LATERAL_SPACING_M,
            longitudinal_spacing_m: LONGITUDINAL_SPACING_M,
        })
    }

    /// Full `rows × cols` grid numbered row-major from 1.
    pub fn rectangular(rows: usize, cols: usize) -> Result<Self> {
        let positions = (0..rows * cols)
            .map(|k| ((k + 1) as u32, ((k / cols) as i64, (k % cols) as i64)))
            .collect();
        Self::new(positions)
    }

    /// Parses a `sensor_index,row,col` CSV.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut positions = BTreeMap::new();
        for rec in rdr.deserialize() {
            let r: LayoutRow = rec?;
            if positions.insert(r.sensor_index, (r.row, r.col)).is_some() {
                return Err(Error::InvalidGrid(format!("sensor {} listed twice", r.sensor_index)));
            }
        }
        Self::new(positions)
    }

    /// The 30-accelerometer layout: 5 rows of 6, numbered row-major.
    pub fn bundled() -> Self {
        Self::from_csv_str(BUNDLED_LAYOUT).expect("bundled layout is valid")
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Sensor indices, ascending.
    pub fn sensors(&self) -> Vec<u32> {
        self.positions.keys().copied().collect()
    }

    pub fn position(&self, sensor: u32) -> Option<(i64, i64)> {
        self.positions.get(&sensor).copied()
    }

    /// Grid-adjacent pairs (up/down/left/right), each once as `(low, high)`, sorted.
    pub fn neighbor_pairs(&self) -> Vec<(u32, u32)> {
        let at: BTreeMap<(i64, i64), u32> = self.positions.iter().map(|(s, p)| (*p, *s)).collect();
        let mut pairs = BTreeSet::new();
        for (&s, &(r, c)) in &self.positions {
            for nb in [(r, c + 1), (r + 1, c)] {
                if let Some(&o) = at.get(&nb) {
                    pairs.insert((s.min(o), s.max(o)));
                }
            }
        }
        pairs.into_iter().collect()
    }

    pub fn neighbors_of(&self, sensor: u32) -> Vec<u32> {
        self.neighbor_pairs()
            .into_iter()
            .filter_map(|(a, b)| match (a == sensor, b == sensor) {
                (true, _) => Some(b),
                (_, true) => Some(a),
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEdge {
    pub a: u32,
    pub b: u32,
    /// Raw estimate; may dip below zero under Monte Carlo noise.
    pub mi: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMiMap {
    pub scenario: String,
    pub axis: Axis,
    pub family: Family,
    pub edges: Vec<MiEdge>,
}

impl PairwiseMiMap {
    pub fn get(&self, a: u32, b: u32) -> Option<&MiEdge> {
        let (a, b) = (a.min(b), a.max(b));
        self.edges.iter().find(|e| e.a == a && e.b == b)
    }

    pub fn pairs(&self) -> Vec<(u32, u32)> {
        self.edges.iter().map(|e| (e.a, e.b)).collect()
    }

    /// Edge with the largest MI; first in pair order on ties.
    pub fn max_edge(&self) -> Option<&MiEdge> {
        self.edges
            .iter()
            .reduce(|best, e| if e.mi > best.mi { e } else { best })
    }
}

/// MI on every neighbor pair of `grid`, using the `axis` channel of each sensor.
pub fn pairwise_mi_map(
    x: &TimeSeriesMatrix,
    grid: &SensorGrid,
    axis: Axis,
    estimator: &Estimator,
    scenario: &str,
) -> Result<PairwiseMiMap> {
    let mut index = BTreeMap::new();
    for s in grid.sensors() {
        let k = x
            .channel_index(ChannelId::new(s, axis))
            .ok_or(Error::MissingChannel { sensor: s, axis })?;
        index.insert(s, k);
    }
    let edges = grid
        .neighbor_pairs()
        .par_iter()
        .map(|&(a, b)| {
            let est = estimator.mutual_information(x, index[&a], index[&b])?;
            Ok(MiEdge {
                a,
                b,
                mi: est.value,
                std_error: est.std_error,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairwiseMiMap {
        scenario: scenario.to_string(),
        axis,
        family: estimator.config().family,
        edges,
    })
}

pub const DIFF_CONVENTION: &str = "comparison minus baseline";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiDelta {
    pub a: u32,
    pub b: u32,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiMapDiff {
    pub baseline: String,
    pub comparison: String,
    pub axis: Axis,
    pub convention: String,
    pub deltas: Vec<MiDelta>,
}

/// Per-edge `comparison - baseline`, so a weaker coupling shows up negative.
pub fn mi_map_diff(baseline: &PairwiseMiMap, comparison: &PairwiseMiMap) -> Result<MiMapDiff> {
    if baseline.axis != comparison.axis || baseline.pairs() != comparison.pairs() {
        return Err(Error::EdgeSetMismatch);
    }
    let deltas = baseline
        .edges
        .iter()
        .zip(&comparison.edges)
        .map(|(a, b)| MiDelta {
            a: a.a,
            b: a.b,
            delta: b.mi - a.mi,
        })
        .collect();
    Ok(MiMapDiff {
        baseline: baseline.scenario.clone(),
        comparison: comparison.scenario.clone(),
        axis: baseline.axis,
        convention: DIFF_CONVENTION.to_string(),
        deltas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetainedEdge {
    pub source: ChannelId,
    pub target: ChannelId,
    pub baseline_weight: f64,
    pub comparison_weight: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkDiff {
    pub lost: Vec<(ChannelId, ChannelId)>,
    pub gained: Vec<(ChannelId, ChannelId)>,
    pub retained: Vec<RetainedEdge>,
}

/// Partitions directed edges into lost, gained and retained.
pub fn network_diff(baseline: &InteractionNetwork, comparison: &InteractionNetwork) -> Result<NetworkDiff> {
    let nb: BTreeSet<ChannelId> = baseline.nodes.iter().copied().collect();
    let nc: BTreeSet<ChannelId> = comparison.nodes.iter().copied().collect();
    if nb != nc {
        return Err(Error::NodeSetMismatch);
    }
    let wb: BTreeMap<(ChannelId, ChannelId), f64> = baseline
        .edges
        .iter()
        .map(|e| ((e.source, e.target), e.weight))
        .collect();
    let wc: BTreeMap<(ChannelId, ChannelId), f64> = comparison
        .edges
        .iter()
        .map(|e| ((e.source, e.target), e.weight))
        .collect();
    let lost: Vec<_> = wb.keys().filter(|k| !wc.contains_key(k)).copied().collect();
    let gained: Vec<_> = wc.keys().filter(|k| !wb.contains_key(k)).copied().collect();
    let retained: Vec<RetainedEdge> = wb
        .iter()
        .filter_map(|(k, &w0)| {
            wc.get(k).map(|&w1| RetainedEdge {
                source: k.0,
                target: k.1,
                baseline_weight: w0,
                comparison_weight: w1,
                delta: w1 - w0,
            })
        })
        .collect();

    let kept: BTreeSet<_> = retained.iter().map(|r| (r.source, r.target)).collect();
    let lost_set: BTreeSet<_> = lost.iter().copied().collect();
    let gained_set: BTreeSet<_> = gained.iter().copied().collect();
    assert!(lost_set.is_disjoint(&gained_set));
    assert_eq!(
        lost_set.union(&kept).copied().collect::<BTreeSet<_>>(),
        wb.keys().copied().collect()
    );
    assert_eq!(
        gained_set.union(&kept).copied().collect::<BTreeSet<_>>(),
        wc.keys().copied().collect()
    );

    Ok(NetworkDiff { lost, gained, retained })
}
