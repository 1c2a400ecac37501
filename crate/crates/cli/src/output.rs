//! Result-directory layout: manifest, sample tables and JSON snapshots.

use std::fs;
use std::path::Path;

use deformed_wigner::config::RunConfig;
use deformed_wigner::outliers::{OutlierValue, Partition, RescaledOutliers};
use deformed_wigner::tensor::CovarianceTensor;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{runtime, usage, CliResult};

pub const MANIFEST: &str = "manifest.json";
pub const PARTITION: &str = "partition.json";
pub const ZETA: &str = "zeta.csv";
pub const XI: &str = "xi.csv";
pub const COVARIANCE: &str = "covariance.json";
pub const REPORT: &str = "report.json";
pub const ECDF: &str = "ecdf.csv";
pub const HISTOGRAM: &str = "histogram.csv";
pub const MIN_GAP: &str = "min_gap.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub trial: usize,
    pub seed: u64,
    pub reason: String,
}

/// Everything needed to reproduce a results directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the canonical configuration (absent for `compare`).
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    pub timestamp: String,
    pub n: usize,
    pub rank: usize,
    pub partition: Partition,
    pub trials: usize,
    #[serde(default)]
    pub excluded: Vec<Exclusion>,
    #[serde(default)]
    pub fallbacks: usize,
    /// The normalized configuration that produced the run.
    pub config: Option<RunConfig>,
    /// Manifest hashes of the inputs of a comparison.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    pub output_paths: Vec<String>,
}

pub fn config_hash(config: &RunConfig) -> CliResult<String> {
    Ok(sha256_hex(config.canonical_json()?.as_bytes()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// `SOURCE_DATE_EPOCH` when set (for reproducible outputs), else the
/// current time, in RFC 3339.
pub fn timestamp() -> CliResult<String> {
    let when = match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(s) => {
            let secs: i64 = s.trim().parse().map_err(|_| usage(format!("SOURCE_DATE_EPOCH = '{s}' is not an integer")))?;
            chrono::DateTime::from_timestamp(secs, 0).ok_or_else(|| usage("SOURCE_DATE_EPOCH out of range"))?
        }
        Err(_) => chrono::Utc::now(),
    };
    Ok(when.to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn read_manifest(dir: &Path) -> CliResult<RunManifest> {
    read_json(&dir.join(MANIFEST))
}

fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

/// Writes a table of string cells.
pub fn write_table(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(runtime)?;
    for row in rows {
        w.write_record(&row).map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

/// One sample row: trial number, its seed and the family of values.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub trial: usize,
    pub seed: u64,
    pub family: RescaledOutliers,
}

/// `trial,seed,<symbol>[b,i],...` with one row per retained trial.
pub fn write_samples(path: &Path, partition: &Partition, symbol: &str, rows: &[SampleRow]) -> CliResult<()> {
    let mut header = vec!["trial".to_string(), "seed".to_string()];
    header.extend(partition.labels(symbol));
    let body = rows.iter().map(|r| {
        let mut cells = vec![r.trial.to_string(), r.seed.to_string()];
        cells.extend(r.family.values.iter().map(|v| v.value.to_string()));
        cells
    });
    write_table(path, &header, body)
}

fn parse_label(label: &str, symbol: &str) -> Option<(usize, usize)> {
    let inner = label.strip_prefix(symbol)?.strip_prefix('[')?.strip_suffix(']')?;
    let (b, i) = inner.split_once(',')?;
    Some((b.trim().parse().ok()?, i.trim().parse().ok()?))
}

pub fn read_samples(path: &Path, symbol: &str) -> CliResult<Vec<SampleRow>> {
    let bad = |msg: String| usage(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 3 || &header[0] != "trial" || &header[1] != "seed" {
        return Err(bad("expected columns trial, seed and at least one sample column".into()));
    }
    let keys: Vec<(usize, usize)> = header
        .iter()
        .skip(2)
        .map(|l| parse_label(l, symbol).ok_or_else(|| bad(format!("unrecognized column '{l}'"))))
        .collect::<CliResult<_>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| rec.get(k).unwrap_or_default();
        let trial = num(0).parse().map_err(|_| bad(format!("bad trial '{}'", num(0))))?;
        let seed = num(1).parse().map_err(|_| bad(format!("bad seed '{}'", num(1))))?;
        let values = keys
            .iter()
            .enumerate()
            .map(|(k, &(block, index))| {
                let cell = num(k + 2);
                let value = cell.parse().map_err(|_| bad(format!("bad value '{cell}' in trial {trial}")))?;
                Ok(OutlierValue { block, index, value })
            })
            .collect::<CliResult<_>>()?;
        rows.push(SampleRow { trial, seed, family: RescaledOutliers { values } });
    }
    Ok(rows)
}

/// Entrywise covariance: `[i, j, k, l, re, im]` with the deformation's
/// own (one-based) index labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceFile {
    pub indices: Vec<usize>,
    pub clipped: bool,
    pub entries: Vec<(usize, usize, usize, usize, f64, f64)>,
}

impl CovarianceFile {
    pub fn new(cov: &CovarianceTensor, indices: Vec<usize>, clipped: bool) -> Self {
        let r = cov.dim();
        let mut entries = Vec::with_capacity(r.pow(4));
        for i in 0..r {
            for j in 0..r {
                for k in 0..r {
                    for l in 0..r {
                        let z = cov.get(i, j, k, l);
                        entries.push((indices[i], indices[j], indices[k], indices[l], z.re, z.im));
                    }
                }
            }
        }
        Self { indices, clipped, entries }
    }
}
