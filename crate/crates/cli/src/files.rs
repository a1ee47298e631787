//! On-disk artifact schemas and provenance-stamped writers/readers.
//!
//! Text outputs are UTF-8 with LF line endings. CSV artifacts start with a
//! `# stadr <version> config=<digest>` comment line; JSON artifacts carry
//! `version` and `config_digest` fields. Readers of our own formats skip
//! comment lines.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn provenance_line(digest: &str) -> String {
    format!("# stadr {VERSION} config={digest}")
}

pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    fs::write(path, content)
        .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Compute(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

/// Reads a JSON artifact; a missing file maps to a configuration error that
/// names the subcommand that would have produced it.
pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, produced_by: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Config(format!(
                "{} not found; run `stadr {produced_by}` first",
                path.display()
            ))
        } else {
            CliError::Compute(format!("cannot read {}: {e}", path.display()))
        }
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Compute(format!("cannot parse {}: {e}", path.display())))
}

/// Serialized cluster model. Centroids are stored on the normalized scale
/// the clustering ran on; `dtw_cost`/`dtw_band` pin the distance the model
/// was built (and must be queried) with.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub config_digest: String,
    pub k: usize,
    pub w: usize,
    pub seed: u64,
    pub dtw_cost: String,
    pub dtw_band: Option<usize>,
    pub silhouette: f64,
    pub sizes: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub selection: SelectionFile,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SelectionFile {
    pub k_min: usize,
    pub k_max: usize,
    pub k_step: usize,
    pub chosen_k: usize,
    pub scores: Vec<KScoreFile>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KScoreFile {
    pub k: usize,
    pub silhouette: f64,
}

/// Serialized performance-vs-distance curve.
#[derive(Debug, Serialize, Deserialize)]
pub struct CurveFile {
    pub version: String,
    pub config_digest: String,
    pub metric: String,
    pub coeffs: [f64; 3],
    pub domain: [f64; 2],
    pub rss: f64,
    pub n_points: usize,
}

/// One reliability line in the JSON-lines report.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReliabilityLine {
    pub instance_start: usize,
    pub cluster_id: usize,
    pub m: usize,
    pub mean_sq_error: f64,
    pub d_instance: f64,
    pub d_origin: f64,
    pub confine: f64,
    pub stadre: f64,
    pub seed: u64,
    pub out_of_range: bool,
}

/// Header line of JSON-lines outputs.
#[derive(Debug, Serialize, Deserialize)]
pub struct JsonlHeader {
    pub version: String,
    pub config_digest: String,
}

/// Combined run summary.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: String,
    pub config_digest: String,
    pub input: InputSummary,
    pub cluster: ClusterSummary,
    pub curve: CurveSummary,
    pub robustness: RobustnessSummary,
    pub reliability: ReliabilitySummary,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InputSummary {
    pub path: String,
    pub points: usize,
    pub train_points: usize,
    pub validation_points: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub k: usize,
    pub silhouette: f64,
    pub sizes: Vec<usize>,
    pub smallest_cluster_size: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CurveSummary {
    pub metric: String,
    pub coeffs: [f64; 3],
    pub domain: [f64; 2],
    pub rss: f64,
    pub n_points: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub p_min: f64,
    pub d_pmin: f64,
    pub instances: usize,
    pub robust_count: usize,
    pub extrapolated_count: usize,
    pub max_ratio: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ReliabilitySummary {
    pub instances: usize,
    pub mean_stadre: Option<f64>,
    pub min_stadre: Option<f64>,
    pub max_stadre: Option<f64>,
    pub out_of_range_count: usize,
}

/// The columns of a `verdicts.csv` row the summary consumes; the full row
/// is still validated while parsing.
#[derive(Debug, Clone)]
pub struct VerdictRow {
    pub sdd: f64,
    pub ratio: f64,
    pub robust: bool,
}

/// Reads back a verdict CSV written by this tool.
pub fn read_verdicts(path: &Path) -> Result<Vec<VerdictRow>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Config(format!(
                "{} not found; run `stadr stadro` first",
                path.display()
            ))
        } else {
            CliError::Compute(format!("cannot read {}: {e}", path.display()))
        }
    })?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("start,") {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 6 {
            return Err(CliError::Compute(format!(
                "malformed verdict row `{trimmed}` in {}",
                path.display()
            )));
        }
        let parse = |s: &str| -> Result<f64, CliError> {
            s.parse()
                .map_err(|_| CliError::Compute(format!("bad number `{s}` in {}", path.display())))
        };
        fields[0].parse::<usize>().map_err(|_| {
            CliError::Compute(format!("bad start `{}` in {}", fields[0], path.display()))
        })?;
        fields[1].parse::<usize>().map_err(|_| {
            CliError::Compute(format!("bad end `{}` in {}", fields[1], path.display()))
        })?;
        if !fields[2].is_empty() {
            parse(fields[2])?;
        }
        rows.push(VerdictRow {
            sdd: parse(fields[3])?,
            ratio: parse(fields[4])?,
            robust: match fields[5] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(CliError::Compute(format!(
                        "bad robust flag `{other}` in {}",
                        path.display()
                    )))
                }
            },
        });
    }
    Ok(rows)
}

/// Reads back a reliability JSON-lines file written by this tool.
pub fn read_reliability(path: &Path) -> Result<Vec<ReliabilityLine>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::Config(format!(
                "{} not found; run `stadr stadre` first",
                path.display()
            ))
        } else {
            CliError::Compute(format!("cannot read {}: {e}", path.display()))
        }
    })?;
    let mut lines = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if idx == 0 {
            // Header object.
            serde_json::from_str::<JsonlHeader>(line).map_err(|e| {
                CliError::Compute(format!("bad header in {}: {e}", path.display()))
            })?;
            continue;
        }
        lines.push(serde_json::from_str(line).map_err(|e| {
            CliError::Compute(format!("bad record in {}: {e}", path.display()))
        })?);
    }
    Ok(lines)
}
