//! Run configuration: a flat key-value file plus command-line overrides
//! (flags win), validated up front and fingerprinted for provenance.

use std::fmt;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use stadr_core::distance::{DistanceMeasure, DtwCost};
use stadr_core::stadre::ClusterRepr;
use stadr_core::stadro::MetricTag;

use crate::CliError;

/// Which model produces the one-step-ahead predictions.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecasterSpec {
    Persistence,
    Ar { order: usize, ridge: f64 },
    External(PathBuf),
}

impl fmt::Display for ForecasterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForecasterSpec::Persistence => f.write_str("persistence"),
            ForecasterSpec::Ar { order, ridge } => write!(f, "ar:{order}:{ridge}"),
            ForecasterSpec::External(path) => write!(f, "external:{}", path.display()),
        }
    }
}

impl std::str::FromStr for ForecasterSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("persistence") {
            return Ok(ForecasterSpec::Persistence);
        }
        if let Some(rest) = s.strip_prefix("ar:") {
            let mut parts = rest.splitn(2, ':');
            let order = parts
                .next()
                .and_then(|p| p.parse::<usize>().ok())
                .ok_or_else(|| format!("bad ar order in `{s}`"))?;
            let ridge = parts
                .next()
                .and_then(|p| p.parse::<f64>().ok())
                .ok_or_else(|| format!("bad ar ridge in `{s}` (expected ar:ORDER:RIDGE)"))?;
            return Ok(ForecasterSpec::Ar { order, ridge });
        }
        if let Some(path) = s.strip_prefix("external:") {
            return Ok(ForecasterSpec::External(PathBuf::from(path)));
        }
        Err(format!(
            "unknown forecaster `{s}` (expected persistence, ar:ORDER:RIDGE or external:PATH)"
        ))
    }
}

/// Effective configuration of one run. Every numeric field is validated
/// against the preconditions of the operations it feeds; unknown keys in the
/// config file are rejected.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub split_ratio: f64,
    pub window_size: usize,
    pub segment_length: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub k_step: usize,
    /// Fixed cluster count, bypassing silhouette selection.
    pub k_override: Option<usize>,
    pub measure: DistanceMeasure,
    pub metric: MetricTag,
    pub p_min: Option<f64>,
    pub seed: u64,
    pub forecaster: ForecasterSpec,
    pub cluster_repr: ClusterRepr,
    pub dtw_cost: DtwCost,
}

/// Raw option bag collected from the config file and the flags.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverlay {
    pub input_path: Option<PathBuf>,
    pub split_ratio: Option<f64>,
    pub window_size: Option<usize>,
    pub segment_length: Option<usize>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub k_step: Option<usize>,
    pub k_override: Option<usize>,
    pub measure: Option<DistanceMeasure>,
    pub metric: Option<MetricTag>,
    pub p_min: Option<f64>,
    pub seed: Option<u64>,
    pub forecaster: Option<ForecasterSpec>,
    pub cluster_repr: Option<ClusterRepr>,
    pub dtw_cost: Option<DtwCost>,
}

impl ConfigOverlay {
    /// Applies `other` on top of `self` (later wins).
    fn merged(self, other: ConfigOverlay) -> ConfigOverlay {
        ConfigOverlay {
            input_path: other.input_path.or(self.input_path),
            split_ratio: other.split_ratio.or(self.split_ratio),
            window_size: other.window_size.or(self.window_size),
            segment_length: other.segment_length.or(self.segment_length),
            k_min: other.k_min.or(self.k_min),
            k_max: other.k_max.or(self.k_max),
            k_step: other.k_step.or(self.k_step),
            k_override: other.k_override.or(self.k_override),
            measure: other.measure.or(self.measure),
            metric: other.metric.or(self.metric),
            p_min: other.p_min.or(self.p_min),
            seed: other.seed.or(self.seed),
            forecaster: other.forecaster.or(self.forecaster),
            cluster_repr: other.cluster_repr.or(self.cluster_repr),
            dtw_cost: other.dtw_cost.or(self.dtw_cost),
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses the flat `key = value` config file.
pub fn parse_config_file(path: &Path) -> Result<ConfigOverlay, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
    let mut overlay = ConfigOverlay::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| config_err(format!("config line {line}: expected `key = value`")))?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| config_err(format!("config line {line}: bad {what} `{value}`"));
        match key {
            "input_path" => overlay.input_path = Some(PathBuf::from(value)),
            "split_ratio" => overlay.split_ratio = Some(value.parse().map_err(|_| bad("split_ratio"))?),
            "window_size" => overlay.window_size = Some(value.parse().map_err(|_| bad("window_size"))?),
            "segment_length" => {
                overlay.segment_length = Some(value.parse().map_err(|_| bad("segment_length"))?)
            }
            "k_min" => overlay.k_min = Some(value.parse().map_err(|_| bad("k_min"))?),
            "k_max" => overlay.k_max = Some(value.parse().map_err(|_| bad("k_max"))?),
            "k_step" => overlay.k_step = Some(value.parse().map_err(|_| bad("k_step"))?),
            "k" => overlay.k_override = Some(value.parse().map_err(|_| bad("k"))?),
            "measure" => overlay.measure = Some(value.parse().map_err(|e| config_err(format!("config line {line}: {e}")))?),
            "metric" => overlay.metric = Some(value.parse().map_err(|e| config_err(format!("config line {line}: {e}")))?),
            "p_min" => overlay.p_min = Some(value.parse().map_err(|_| bad("p_min"))?),
            "seed" => overlay.seed = Some(value.parse().map_err(|_| bad("seed"))?),
            "forecaster" => overlay.forecaster = Some(value.parse().map_err(|e| config_err(format!("config line {line}: {e}")))?),
            "cluster_repr" => overlay.cluster_repr = Some(value.parse().map_err(|e| config_err(format!("config line {line}: {e}")))?),
            "dtw_cost" => overlay.dtw_cost = Some(value.parse().map_err(|e| config_err(format!("config line {line}: {e}")))?),
            other => return Err(config_err(format!("config line {line}: unknown key `{other}`"))),
        }
    }
    Ok(overlay)
}

impl RunConfig {
    /// Resolves file + flag overlays into a validated configuration.
    pub fn resolve(file: Option<ConfigOverlay>, flags: ConfigOverlay) -> Result<Self, CliError> {
        let overlay = file.unwrap_or_default().merged(flags);
        let config = RunConfig {
            input_path: overlay
                .input_path
                .ok_or_else(|| config_err("input_path is required (config key or --input-path)"))?,
            split_ratio: overlay.split_ratio.unwrap_or(0.8),
            window_size: overlay
                .window_size
                .ok_or_else(|| config_err("window_size is required (config key or --window-size)"))?,
            segment_length: overlay.segment_length.unwrap_or(70),
            k_min: overlay.k_min.unwrap_or(2),
            k_max: overlay.k_max.unwrap_or(6),
            k_step: overlay.k_step.unwrap_or(1),
            k_override: overlay.k_override,
            measure: overlay.measure.unwrap_or(DistanceMeasure::Wasserstein),
            metric: overlay.metric.unwrap_or(MetricTag::Rmse),
            p_min: overlay.p_min,
            seed: overlay.seed.unwrap_or(0),
            forecaster: overlay.forecaster.unwrap_or(ForecasterSpec::Persistence),
            cluster_repr: overlay.cluster_repr.unwrap_or_default(),
            dtw_cost: overlay.dtw_cost.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(config_err(format!(
                "split_ratio must lie strictly between 0 and 1, got {}",
                self.split_ratio
            )));
        }
        if self.window_size == 0 {
            return Err(config_err("window_size must be at least 1"));
        }
        if self.segment_length == 0 {
            return Err(config_err("segment_length must be at least 1"));
        }
        if self.k_min < 2 {
            return Err(config_err(format!("k_min must be at least 2, got {}", self.k_min)));
        }
        if self.k_min > self.k_max {
            return Err(config_err(format!(
                "k_min {} must not exceed k_max {}",
                self.k_min, self.k_max
            )));
        }
        if self.k_step == 0 {
            return Err(config_err("k_step must be at least 1"));
        }
        if let Some(k) = self.k_override {
            if k < 2 {
                return Err(config_err(format!("k must be at least 2, got {k}")));
            }
        }
        if let Some(p) = self.p_min {
            if !(p.is_finite() && p > 0.0) {
                return Err(config_err(format!("p_min must be a positive finite number, got {p}")));
            }
        }
        if let ForecasterSpec::Ar { order, ridge } = &self.forecaster {
            if *order == 0 {
                return Err(config_err("forecaster ar order must be at least 1"));
            }
            if !(ridge.is_finite() && *ridge >= 0.0) {
                return Err(config_err("forecaster ar ridge must be non-negative"));
            }
        }
        Ok(())
    }

    /// Canonical rendering of the semantic configuration. Output locations
    /// and thread counts are deliberately excluded so they cannot change the
    /// digest embedded in outputs.
    pub fn canonical(&self) -> String {
        let mut lines = vec![
            format!("cluster_repr={}", self.cluster_repr),
            format!("dtw_cost={}", self.dtw_cost),
            format!("forecaster={}", self.forecaster),
            format!("input_path={}", self.input_path.display()),
            format!(
                "k={}",
                self.k_override.map_or("auto".to_string(), |k| k.to_string())
            ),
            format!("k_max={}", self.k_max),
            format!("k_min={}", self.k_min),
            format!("k_step={}", self.k_step),
            format!("measure={}", self.measure),
            format!("metric={}", self.metric),
            format!(
                "p_min={}",
                self.p_min.map_or("none".to_string(), |p| p.to_string())
            ),
            format!("seed={}", self.seed),
            format!("segment_length={}", self.segment_length),
            format!("split_ratio={}", self.split_ratio),
            format!("window_size={}", self.window_size),
        ];
        lines.sort();
        lines.join("\n")
    }

    /// Short hex fingerprint of the canonical configuration.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hash.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }
}
