//! `omii` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use omii_core::estimators::DEFAULT_MC_SAMPLES;
use omii_core::io::{self, Provenance};
use omii_core::omii::{degree_distribution, DEFAULT_SHUFFLES, DEFAULT_THETA};
use omii_core::pipeline::{axis_matrix, fit_report, run_pipeline_recorded, RunConfig, ScenarioInput};
use omii_core::series::DEFAULT_SAMPLE_RATE_HZ;
use omii_core::spatial::{mi_map_diff, network_diff, pairwise_mi_map, PairwiseMiMap};
use omii_core::synthetic::{
    generate_contemporaneous, generate_var, lattice_coupling, Coupling, GeneratorSpec, Innovation,
};
use omii_core::{Axis, Estimator, Family, InteractionNetwork, OmiiConfig, OmiiEngine, SensorGrid};

#[derive(Debug, Parser)]
#[command(
    name = "omii",
    version,
    about = "Direct-interaction networks from sensor time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-channel l1 fit error against Laplace and normal densities.
    FitReport(FitReportArgs),
    /// Mutual information between neighboring sensors.
    PairwiseMi(PairwiseMiArgs),
    /// Infer the interaction network of one axis.
    Omii(OmiiArgs),
    /// Compare two networks or two MI maps written as JSON.
    Diff(DiffArgs),
    /// Write synthetic data with a known coupling graph.
    Generate(GenerateArgs),
    /// Run the full analysis over several scenarios.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
struct InputArgs {
    /// CSV with `s<index>_<lat|vert>` columns.
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
    sample_rate_hz: f64,
}

#[derive(Debug, Args)]
struct EstimatorArgs {
    #[arg(long, default_value = "laplace")]
    family: Family,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
    #[arg(long)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FitReportArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Scenario label; the file stem by default.
    #[arg(long)]
    label: Option<String>,
    /// Output JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PairwiseMiArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "lat")]
    axis: Axis,
    /// `sensor_index,row,col` layout; the bundled 30-sensor grid when absent.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long)]
    label: Option<String>,
    /// Output path; JSON when it ends in `.json`, CSV otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OmiiArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, default_value = "lat")]
    axis: Axis,
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = DEFAULT_SHUFFLES)]
    shuffles: usize,
    /// Network JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Degree histogram CSV.
    #[arg(long)]
    degrees: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiffArgs {
    baseline: PathBuf,
    comparison: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    /// Equal-time linear structural model on a DAG.
    Dag,
    /// Lag-one vector autoregression.
    Var,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InnovationArg {
    Gaussian,
    Laplace,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Generator spec as JSON; overrides the shape flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "dag")]
    kind: Kind,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, value_enum, default_value = "laplace")]
    innovation: InnovationArg,
    /// Coupling `source>target:weight` over 0-based channel indices; repeatable.
    #[arg(long = "edge", value_parser = parse_edge)]
    edges: Vec<Coupling>,
    /// Couple every grid neighbor pair with this weight.
    #[arg(long)]
    lattice: Option<f64>,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value = "lat")]
    axis: Axis,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    /// RunConfig JSON; the remaining flags are ignored except `--out`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `label=path`; the first is the baseline. Repeatable.
    #[arg(long = "scenario", value_parser = parse_scenario)]
    scenarios: Vec<ScenarioInput>,
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "lat,vert")]
    axes: Vec<Axis>,
    #[arg(long, default_value = "laplace")]
    family: Family,
    #[arg(long, default_value_t = DEFAULT_THETA)]
    theta: f64,
    #[arg(long, default_value_t = DEFAULT_SHUFFLES)]
    shuffles: usize,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
    sample_rate_hz: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_edge(s: &str) -> std::result::Result<Coupling, String> {
    let err = || format!("expected source>target:weight, got {s:?}");
    let (pair, w) = s.split_once(':').ok_or_else(err)?;
    let (a, b) = pair.split_once('>').ok_or_else(err)?;
    Ok(Coupling::new(
        a.trim().parse().map_err(|_| err())?,
        b.trim().parse().map_err(|_| err())?,
        w.trim().parse().map_err(|_| err())?,
    ))
}

fn parse_scenario(s: &str) -> std::result::Result<ScenarioInput, String> {
    let (label, path) = s
        .split_once('=')
        .ok_or_else(|| format!("expected label=path, got {s:?}"))?;
    Ok(ScenarioInput {
        label: label.to_string(),
        path: path.into(),
    })
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn provenance(record: &Value, seed: u64) -> Result<Provenance> {
    Ok(Provenance::new(io::config_hash(record)?, seed))
}

fn emit_json<T: serde::Serialize>(out: Option<&Path>, prov: &Provenance, body: &T) -> Result<()> {
    match out {
        Some(p) => io::write_stamped(p, prov, body)?,
        None => {
            let mut v = serde_json::to_value(body)?;
            if let Value::Object(m) = &mut v {
                m.insert("provenance".into(), serde_json::to_value(prov)?);
            }
            print!("{}", io::to_json(&v)?);
        }
    }
    Ok(())
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_text(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_grid(path: Option<&Path>) -> Result<SensorGrid> {
    Ok(match path {
        Some(p) => io::read_grid(p)?,
        None => SensorGrid::bundled(),
    })
}

fn fit_report_cmd(a: FitReportArgs) -> Result<()> {
    let x = io::ingest_csv_at(&a.input.input, a.input.sample_rate_hz)?;
    let label = a.label.unwrap_or_else(|| stem(&a.input.input));
    let prov = provenance(
        &json!({"verb": "fit-report", "input": a.input.input, "label": label}),
        0,
    )?;
    emit_json(a.out.as_deref(), &prov, &fit_report(&x, &label)?)
}

fn pairwise_mi_cmd(a: PairwiseMiArgs) -> Result<()> {
    let raw = io::ingest_csv_at(&a.input.input, a.input.sample_rate_hz)?;
    let grid = load_grid(a.grid.as_deref())?;
    let cfg = OmiiConfig::new(a.estimator.family, a.estimator.seed).with_mc_samples(a.estimator.mc_samples);
    let est = Estimator::new(cfg.estimator)?;
    let label = a.label.unwrap_or_else(|| stem(&a.input.input));
    let map = pairwise_mi_map(&axis_matrix(&raw, a.axis)?, &grid, a.axis, &est, &label)?;
    let prov = provenance(
        &json!({"verb": "pairwise-mi", "input": a.input.input, "grid": a.grid, "estimator": cfg.estimator}),
        a.estimator.seed,
    )?;
    match a.out.as_deref() {
        Some(p) if p.extension().is_some_and(|e| e == "json") => emit_json(Some(p), &prov, &map),
        out => emit_text(out, &io::format_mi_map(&map, &prov)),
    }
}

fn omii_cmd(a: OmiiArgs) -> Result<()> {
    let raw = io::ingest_csv_at(&a.input.input, a.input.sample_rate_hz)?;
    let cfg = OmiiConfig::new(a.estimator.family, a.estimator.seed)
        .with_theta(a.theta)
        .with_shuffles(a.shuffles)
        .with_mc_samples(a.estimator.mc_samples);
    cfg.validate()?;
    let x = axis_matrix(&raw, a.axis)?;
    let net = OmiiEngine::new(&x, cfg)?.infer_network()?;
    let prov = provenance(
        &json!({"verb": "omii", "input": a.input.input, "axis": a.axis, "config": cfg}),
        cfg.seed,
    )?;
    emit_json(a.out.as_deref(), &prov, &net)?;
    if let Some(p) = &a.dot {
        io::write_text(p, &net.to_dot())?;
    }
    if let Some(p) = &a.degrees {
        io::write_text(p, &io::format_degrees(&degree_distribution(&net), &prov))?;
    }
    Ok(())
}

enum Artifact {
    Network(InteractionNetwork),
    Map(PairwiseMiMap),
}

fn read_artifact(path: &Path) -> Result<Artifact> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if v.get("nodes").is_some() {
        Ok(Artifact::Network(serde_json::from_value(v)?))
    } else if v.get("scenario").is_some() && v.get("edges").is_some() {
        Ok(Artifact::Map(serde_json::from_value(v)?))
    } else {
        bail!("{} is neither a network nor an MI map", path.display())
    }
}

fn diff_cmd(a: DiffArgs) -> Result<()> {
    let prov = provenance(
        &json!({"verb": "diff", "baseline": a.baseline, "comparison": a.comparison}),
        0,
    )?;
    match (read_artifact(&a.baseline)?, read_artifact(&a.comparison)?) {
        (Artifact::Network(b), Artifact::Network(c)) => emit_json(a.out.as_deref(), &prov, &network_diff(&b, &c)?),
        (Artifact::Map(b), Artifact::Map(c)) => {
            let d = mi_map_diff(&b, &c)?;
            match a.out.as_deref() {
                Some(p) if p.extension().is_some_and(|e| e == "json") => emit_json(Some(p), &prov, &d),
                out => emit_text(out, &io::format_mi_diff(&d, &prov)),
            }
        }
        _ => bail!("cannot compare a network with an MI map"),
    }
}

fn generate_cmd(a: GenerateArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => serde_json::from_str::<GeneratorSpec>(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => {
            let Some(seed) = a.seed else {
                bail!("--seed is required without --spec")
            };
            let innovation = match a.innovation {
                InnovationArg::Gaussian => Innovation::Gaussian,
                InnovationArg::Laplace => Innovation::Laplace,
            };
            let mut coupling = a.edges.clone();
            let mut sensors = None;
            let n = if let Some(w) = a.lattice {
                let grid = load_grid(a.grid.as_deref())?;
                coupling.extend(lattice_coupling(&grid, w));
                sensors = Some(grid.sensors());
                grid.len()
            } else {
                match a.channels {
                    Some(n) => n,
                    None => bail!("--channels is required without --lattice or --spec"),
                }
            };
            let mut spec = GeneratorSpec::new(n, a.samples, innovation, seed).with_coupling(coupling);
            spec.axis = a.axis;
            spec.sensors = sensors;
            spec
        }
    };
    let x = match a.kind {
        Kind::Dag => generate_contemporaneous(&spec)?,
        Kind::Var => generate_var(&spec)?,
    };
    io::write_csv(&a.out, &x)?;
    Ok(())
}

fn pipeline_cmd(a: PipelineArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            RunConfig::from_json(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?
        }
        None => {
            let Some(seed) = a.seed else {
                bail!("--seed is required without --config")
            };
            let Some(out) = a.out.clone() else {
                bail!("--out is required without --config")
            };
            let mut cfg = RunConfig::new(a.scenarios, seed, out);
            cfg.grid = a.grid;
            cfg.axes = a.axes;
            cfg.family = a.family;
            cfg.theta = a.theta;
            cfg.n_shuffles = a.shuffles;
            cfg.mc_samples = a.mc_samples;
            cfg.sample_rate_hz = a.sample_rate_hz;
            cfg
        }
    };
    if let Some(out) = a.out {
        cfg.output_dir = out;
    }
    let summary = run_pipeline_recorded(&cfg)?;
    println!("wrote {} files to {}", summary.files.len(), cfg.output_dir.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::FitReport(a) => fit_report_cmd(a),
        Command::PairwiseMi(a) => pairwise_mi_cmd(a),
        Command::Omii(a) => omii_cmd(a),
        Command::Diff(a) => diff_cmd(a),
        Command::Generate(a) => generate_cmd(a),
        Command::Pipeline(a) => pipeline_cmd(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e.downcast_ref::<omii_core::Error>() {
                Some(core) => eprintln!("error [{}]: {e:#}", core.kind()),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::FAILURE
        }
    }
}
