//! CSV ingestion and artifact writers.
//!
//! Input files have a header of channel names (`s<index>_<lat|vert>`) and one
//! row per time sample. Samples are held as `f64` columns, so a 90 s record at
//! 128 Hz (11536 rows) over 60 channels occupies about 5.5 MB.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::omii::DegreeDistribution;
use crate::series::{ChannelId, TimeSeriesMatrix, DEFAULT_SAMPLE_RATE_HZ};
use crate::spatial::{MiMapDiff, PairwiseMiMap, SensorGrid};

/// Stamp written into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub artifact_version: String,
}

impl Provenance {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Provenance {
            config_hash: config_hash.into(),
            seed,
            artifact_version: crate::ARTIFACT_VERSION.to_string(),
        }
    }

    /// `# key: value` lines for CSV artifacts.
    pub fn comment_lines(&self) -> String {
        format!(
            "# config_hash: {}\n# seed: {}\n# artifact_version: {}\n",
            self.config_hash, self.seed, self.artifact_version
        )
    }
}

/// SHA-256 hex of the compact JSON form of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Writes `body` as JSON with a top-level `provenance` object.
pub fn write_stamped<T: Serialize>(path: &Path, prov: &Provenance, body: &T) -> Result<()> {
    write_json(path, &Stamped { provenance: prov, body })
}

fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Parses CSV text; `origin` names the source in `EmptyFile` errors.
pub fn parse_csv(text: &str, origin: &Path, sample_rate_hz: f64) -> Result<TimeSeriesMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(Error::EmptyFile(origin.to_path_buf())),
    };
    let channels = header
        .iter()
        .enumerate()
        .map(|(c, name)| {
            name.parse::<ChannelId>()
                .map_err(|e| parse_error(1, c + 1, format!("bad channel name {name:?}: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = channels.len();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n];
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != n {
            return Err(parse_error(
                line,
                rec.len().min(n) + 1,
                format!("expected {n} fields, found {}", rec.len()),
            ));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(line, c + 1, format!("non-numeric cell {cell:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(line, c + 1, format!("non-finite cell {cell:?}")));
            }
            columns[c].push(v);
        }
    }
    if columns[0].is_empty() {
        return Err(Error::EmptyFile(origin.to_path_buf()));
    }
    TimeSeriesMatrix::new(columns, channels, sample_rate_hz)
}

pub fn ingest_csv(path: &Path) -> Result<TimeSeriesMatrix> {
    ingest_csv_at(path, DEFAULT_SAMPLE_RATE_HZ)
}

pub fn ingest_csv_at(path: &Path, sample_rate_hz: f64) -> Result<TimeSeriesMatrix> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, path, sample_rate_hz)
}

/// Same schema as [`ingest_csv`]; values use shortest round-trip formatting.
pub fn format_csv(x: &TimeSeriesMatrix) -> String {
    let mut out = String::with_capacity(x.len() * x.n_channels() * 20);
    let names: Vec<String> = x.channels().iter().map(|c| c.to_string()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for t in 0..x.len() {
        for k in 0..x.n_channels() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{}", x.column(k)[t]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, x: &TimeSeriesMatrix) -> Result<()> {
    write_text(path, &format_csv(x))
}

pub fn read_grid(path: &Path) -> Result<SensorGrid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SensorGrid::from_csv_str(&text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value)?)
}

/// `a,b,mi,mi_raw,std_error`; `mi` is the raw value clamped at zero.
pub fn format_mi_map(map: &PairwiseMiMap, prov: &Provenance) -> String {
    let mut out = prov.comment_lines();
    writeln!(
        out,
        "# scenario: {}\n# axis: {}\n# family: {}",
        map.scenario, map.axis, map.family
    )
    .unwrap();
    out.push_str("sensor_a,sensor_b,mi,mi_raw,std_error\n");
    for e in &map.edges {
        writeln!(out, "{},{},{},{},{}", e.a, e.b, e.mi.max(0.0), e.mi, e.std_error).unwrap();
    }
    out
}

pub fn format_mi_diff(diff: &MiMapDiff, prov: &Provenance) -> String {
    let mut out = prov.comment_lines();
    writeln!(
        out,
        "# baseline: {}\n# comparison: {}\n# axis: {}\n# delta: {}",
        diff.baseline, diff.comparison, diff.axis, diff.convention
    )
    .unwrap();
    out.push_str("sensor_a,sensor_b,delta\n");
    for d in &diff.deltas {
        writeln!(out, "{},{},{}", d.a, d.b, d.delta).unwrap();
    }
    out
}

/// `degree,in_fraction,out_fraction`, padded to the longer histogram.
pub fn format_degrees(deg: &DegreeDistribution, prov: &Provenance) -> String {
    let mut out = prov.comment_lines();
    out.push_str("degree,in_fraction,out_fraction\n");
    let len = deg.in_histogram.len().max(deg.out_histogram.len());
    for k in 0..len {
        let i = deg.in_histogram.get(k).copied().unwrap_or(0.0);
        let o = deg.out_histogram.get(k).copied().unwrap_or(0.0);
        writeln!(out, "{k},{i},{o}").unwrap();
    }
    out
}
