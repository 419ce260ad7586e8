//! End-to-end run: distribution fit report, pairwise MI maps, oMII networks
//! and scenario-versus-baseline differences, written as a bundle of files.
//!
//! The first scenario is the baseline. Every artifact carries the config
//! hash, the seed and [`crate::ARTIFACT_VERSION`].

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distributions::{fit_error_l1, EmpiricalDistribution, UnivariateModel};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, Family, DEFAULT_MC_SAMPLES, MIN_REPORTED_MC_SAMPLES};
use crate::io::{self, write_stamped, Provenance};
use crate::omii::{degree_distribution, InteractionNetwork, OmiiConfig, OmiiEngine, DEFAULT_SHUFFLES, DEFAULT_THETA};
use crate::series::{Axis, ChannelId, TimeSeriesMatrix, DEFAULT_SAMPLE_RATE_HZ};
use crate::spatial::{mi_map_diff, network_diff, pairwise_mi_map, NetworkDiff, PairwiseMiMap, SensorGrid};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioInput {
    pub label: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// One CSV per scenario; the first is the baseline.
    pub scenarios: Vec<ScenarioInput>,
    /// `sensor_index,row,col` layout; the bundled 30-sensor grid when absent.
    #[serde(default)]
    pub grid: Option<PathBuf>,
    #[serde(default = "default_axes")]
    pub axes: Vec<Axis>,
    #[serde(default = "default_family")]
    pub family: Family,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_shuffles")]
    pub n_shuffles: usize,
    #[serde(default = "default_mc")]
    pub mc_samples: usize,
    pub seed: u64,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    pub output_dir: PathBuf,
}

fn default_axes() -> Vec<Axis> {
    vec![Axis::Lateral, Axis::Vertical]
}
fn default_family() -> Family {
    Family::Laplace
}
fn default_theta() -> f64 {
    DEFAULT_THETA
}
fn default_shuffles() -> usize {
    DEFAULT_SHUFFLES
}
fn default_mc() -> usize {
    DEFAULT_MC_SAMPLES
}
fn default_rate() -> f64 {
    DEFAULT_SAMPLE_RATE_HZ
}

impl RunConfig {
    pub fn new(scenarios: Vec<ScenarioInput>, seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            scenarios,
            grid: None,
            axes: default_axes(),
            family: default_family(),
            theta: DEFAULT_THETA,
            n_shuffles: DEFAULT_SHUFFLES,
            mc_samples: DEFAULT_MC_SAMPLES,
            seed,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            output_dir: output_dir.into(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn omii_config(&self) -> OmiiConfig {
        OmiiConfig::new(self.family, self.seed)
            .with_theta(self.theta)
            .with_shuffles(self.n_shuffles)
            .with_mc_samples(self.mc_samples)
    }

    /// Everything that can be checked without reading the inputs.
    pub fn validate(&self) -> Result<()> {
        self.omii_config().validate()?;
        if self.mc_samples < MIN_REPORTED_MC_SAMPLES {
            return Err(Error::InvalidConfig(format!(
                "mc_samples {} is below the minimum {MIN_REPORTED_MC_SAMPLES}",
                self.mc_samples
            )));
        }
        if self.scenarios.is_empty() {
            return Err(Error::InvalidConfig("no scenarios".into()));
        }
        let mut labels = BTreeSet::new();
        for s in &self.scenarios {
            let ok = !s.label.is_empty()
                && s.label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok {
                return Err(Error::InvalidConfig(format!(
                    "scenario label {:?} must be non-empty [A-Za-z0-9_-]",
                    s.label
                )));
            }
            if !labels.insert(&s.label) {
                return Err(Error::InvalidConfig(format!("scenario label {:?} repeated", s.label)));
            }
            if !s.path.is_file() {
                return Err(Error::InvalidConfig(format!(
                    "input {} does not exist",
                    s.path.display()
                )));
            }
        }
        if let Some(g) = &self.grid {
            if !g.is_file() {
                return Err(Error::InvalidConfig(format!("grid {} does not exist", g.display())));
            }
        }
        if self.axes.is_empty() || self.axes.iter().collect::<BTreeSet<_>>().len() != self.axes.len() {
            return Err(Error::InvalidConfig("axes must be non-empty and distinct".into()));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::InvalidConfig("sample_rate_hz must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON of the config with the output directory blanked.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        io::config_hash(&c).expect("config serializes")
    }

    pub fn provenance(&self) -> Provenance {
        Provenance::new(self.hash(), self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub channel: ChannelId,
    pub l1_laplace: f64,
    pub l1_normal: f64,
    pub n_bins: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub scenario: String,
    pub channels: Vec<ChannelFit>,
}

impl FitReport {
    /// Channels where the Laplace baseline fits strictly better.
    pub fn laplace_wins(&self) -> usize {
        self.channels.iter().filter(|c| c.l1_laplace < c.l1_normal).count()
    }
}

/// Relative l1 error of each standardized channel against the unit-variance
/// Laplace and normal densities.
pub fn fit_report(x: &TimeSeriesMatrix, scenario: &str) -> Result<FitReport> {
    let z = x.standardize()?;
    let lap = UnivariateModel::standard_laplace();
    let nor = UnivariateModel::standard_normal();
    let channels = (0..z.n_channels())
        .map(|k| {
            let emp = EmpiricalDistribution::from_samples(z.column(k))?;
            Ok(ChannelFit {
                channel: z.channels()[k],
                l1_laplace: fit_error_l1(&emp, &lap)?,
                l1_normal: fit_error_l1(&emp, &nor)?,
                n_bins: emp.n_bins(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FitReport {
        scenario: scenario.to_string(),
        channels,
    })
}

/// Standardized channels of one axis, in file order.
pub fn axis_matrix(x: &TimeSeriesMatrix, axis: Axis) -> Result<TimeSeriesMatrix> {
    let idx = x.axis_indices(axis);
    if idx.is_empty() {
        return Err(Error::InvalidConfig(format!("no {axis} channels in input")));
    }
    x.select(&idx)?.standardize()
}

#[derive(Serialize)]
struct NetworkDiffRecord<'a> {
    baseline: &'a str,
    comparison: &'a str,
    axis: Axis,
    diff: &'a NetworkDiff,
}

#[derive(Serialize)]
struct ConfigRecord<'a> {
    config: &'a RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Paths relative to the output directory, sorted.
    pub files: Vec<String>,
}

struct Bundle<'a> {
    root: &'a Path,
    prov: Provenance,
    files: Vec<String>,
}

impl Bundle<'_> {
    fn path(&mut self, rel: String) -> PathBuf {
        let p = self.root.join(&rel);
        self.files.push(rel);
        p
    }

    fn json<T: Serialize>(&mut self, rel: String, body: &T) -> Result<()> {
        let p = self.path(rel);
        write_stamped(&p, &self.prov, body)
    }

    fn text(&mut self, rel: String, text: &str) -> Result<()> {
        let p = self.path(rel);
        io::write_text(&p, text)
    }
}

struct AxisResult {
    map: PairwiseMiMap,
    network: InteractionNetwork,
}

/// Runs the full analysis and writes the bundle under `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let grid = match &cfg.grid {
        Some(p) => io::read_grid(p)?,
        None => SensorGrid::bundled(),
    };
    let omii_cfg = cfg.omii_config();
    let mut bundle = Bundle {
        root: &cfg.output_dir,
        prov: cfg.provenance(),
        files: Vec::new(),
    };
    bundle.json("config.json".into(), &ConfigRecord { config: cfg })?;

    let mut results: Vec<Vec<AxisResult>> = Vec::with_capacity(cfg.scenarios.len());
    for sc in &cfg.scenarios {
        let raw = io::ingest_csv_at(&sc.path, cfg.sample_rate_hz)?;
        bundle.json(format!("{}/fit_report.json", sc.label), &fit_report(&raw, &sc.label)?)?;
        let mut per_axis = Vec::with_capacity(cfg.axes.len());
        for &axis in &cfg.axes {
            let x = axis_matrix(&raw, axis)?;
            let estimator = Estimator::new(omii_cfg.estimator)?;
            let map = pairwise_mi_map(&x, &grid, axis, &estimator, &sc.label)?;
            bundle.text(
                format!("{}/mi_map_{}.csv", sc.label, axis.short_name()),
                &io::format_mi_map(&map, &bundle.prov),
            )?;
            let network = OmiiEngine::new(&x, omii_cfg)?.infer_network()?;
            bundle.json(format!("{}/network_{}.json", sc.label, axis.short_name()), &network)?;
            bundle.text(
                format!("{}/network_{}.dot", sc.label, axis.short_name()),
                &network.to_dot(),
            )?;
            let deg = degree_distribution(&network);
            bundle.text(
                format!("{}/degrees_{}.csv", sc.label, axis.short_name()),
                &io::format_degrees(&deg, &bundle.prov),
            )?;
            per_axis.push(AxisResult { map, network });
        }
        results.push(per_axis);
    }

    let base_label = &cfg.scenarios[0].label;
    for (k, sc) in cfg.scenarios.iter().enumerate().skip(1) {
        let dir = format!("diff_{}_vs_{}", base_label, sc.label);
        for (a, &axis) in cfg.axes.iter().enumerate() {
            let base = &results[0][a];
            let cmp = &results[k][a];
            let md = mi_map_diff(&base.map, &cmp.map)?;
            bundle.text(
                format!("{dir}/mi_diff_{}.csv", axis.short_name()),
                &io::format_mi_diff(&md, &bundle.prov),
            )?;
            let nd = network_diff(&base.network, &cmp.network)?;
            bundle.json(
                format!("{dir}/network_diff_{}.json", axis.short_name()),
                &NetworkDiffRecord {
                    baseline: base_label,
                    comparison: &sc.label,
                    axis,
                    diff: &nd,
                },
            )?;
        }
    }

    bundle.files.push("manifest.json".into());
    bundle.files.sort();
    let summary = RunSummary {
        files: bundle.files.clone(),
    };
    write_stamped(&cfg.output_dir.join("manifest.json"), &bundle.prov, &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorRecord {
    fn from(e: &Error) -> Self {
        ErrorRecord {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

/// [`run_pipeline`], writing `error.json` into the output directory on failure.
pub fn run_pipeline_recorded(cfg: &RunConfig) -> Result<RunSummary> {
    let out = run_pipeline(cfg);
    if let Err(e) = &out {
        let _ = write_stamped(
            &cfg.output_dir.join("error.json"),
            &cfg.provenance(),
            &ErrorRecord::from(e),
        );
    }
    out
}
