//! `stadr`: statistical-distance reliability and robustness monitoring for
//! time-series forecasts.
//!
//! Exit codes: 0 success, 2 input-data errors, 3 configuration errors
//! (including missing upstream artifacts), 4 computation errors.

mod config;
mod files;
mod pipeline;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use stadr_core::distance::{DistanceMeasure, DtwCost};
use stadr_core::stadre::ClusterRepr;
use stadr_core::stadro::MetricTag;

use config::{ConfigOverlay, ForecasterSpec, RunConfig};
use pipeline::Pipeline;

#[derive(Debug)]
pub enum CliError {
    /// Input data could not be read or validated.
    Ingest(String),
    /// Configuration (or a missing upstream artifact) is invalid.
    Config(String),
    /// A computation failed on valid configuration and input.
    Compute(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Ingest(_) => 2,
            CliError::Config(_) => 3,
            CliError::Compute(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Ingest(msg) | CliError::Config(msg) | CliError::Compute(msg) => {
                f.write_str(msg)
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "stadr",
    version,
    about = "Statistical-distance dissimilarity, reliability and robustness estimation for time-series forecasting"
)]
struct Cli {
    /// Flat `key = value` configuration file; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory the artifacts are written to.
    #[arg(long, global = true, default_value = "stadr_out")]
    out: PathBuf,
    /// Worker threads (0 = library default). Outputs are identical for any
    /// thread count.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Input CSV with a `date,value` header.
    #[arg(long, global = true)]
    input_path: Option<PathBuf>,
    /// Fraction of the series used for training (default 0.8).
    #[arg(long, global = true)]
    split_ratio: Option<f64>,
    /// Sliding-window length for clustering and reliability instances.
    #[arg(long, global = true)]
    window_size: Option<usize>,
    /// Validation segment length for distance and robustness (default 70).
    #[arg(long, global = true)]
    segment_length: Option<usize>,
    /// Smallest cluster count to try (default 2).
    #[arg(long, global = true)]
    k_min: Option<usize>,
    /// Largest cluster count to try (default 6).
    #[arg(long, global = true)]
    k_max: Option<usize>,
    /// Step between tried cluster counts (default 1).
    #[arg(long, global = true)]
    k_step: Option<usize>,
    /// Fixed cluster count, bypassing silhouette selection.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Distance measure: wasserstein (default), kolmogorov-smirnov, cramer-von-mises.
    #[arg(long, global = true)]
    measure: Option<DistanceMeasure>,
    /// Performance metric the curve is fitted on: rmse (default) or mape.
    #[arg(long, global = true)]
    metric: Option<MetricTag>,
    /// Required minimum performance for robustness verdicts.
    #[arg(long, global = true)]
    p_min: Option<f64>,
    /// Run seed; all randomness derives from it (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Forecaster: persistence (default), ar:ORDER:RIDGE or external:PATH.
    #[arg(long, global = true)]
    forecaster: Option<ForecasterSpec>,
    /// Cluster representative for reliability distances: centroid (default) or pooled.
    #[arg(long, global = true)]
    cluster_repr: Option<ClusterRepr>,
    /// DTW local cost: abs (default) or squared.
    #[arg(long, global = true)]
    dtw_cost: Option<DtwCost>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate the input CSV and write the canonical series file.
    Ingest,
    /// Per-segment statistical distance between training and validation data.
    Sdd,
    /// Cluster training windows and write the model file.
    Cluster,
    /// Fit the performance-vs-distance curve (exports internal predictions).
    Curve,
    /// Robustness verdicts per validation segment.
    Stadro,
    /// Reliability reports per validation instance window.
    Stadre,
    /// Combined summary from previously written artifacts.
    Report,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(3);
        }
    };
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file_overlay = cli
        .config
        .as_deref()
        .map(config::parse_config_file)
        .transpose()?;
    let flags = ConfigOverlay {
        input_path: cli.input_path,
        split_ratio: cli.split_ratio,
        window_size: cli.window_size,
        segment_length: cli.segment_length,
        k_min: cli.k_min,
        k_max: cli.k_max,
        k_step: cli.k_step,
        k_override: cli.k,
        measure: cli.measure,
        metric: cli.metric,
        p_min: cli.p_min,
        seed: cli.seed,
        forecaster: cli.forecaster,
        cluster_repr: cli.cluster_repr,
        dtw_cost: cli.dtw_cost,
    };
    let cfg = RunConfig::resolve(file_overlay, flags)?;
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Compute(format!("cannot create {}: {e}", cli.out.display())))?;
    let pipeline = Pipeline { cfg, out: cli.out };
    match cli.command {
        Command::Ingest => pipeline.cmd_ingest(),
        Command::Sdd => pipeline.cmd_sdd(),
        Command::Cluster => pipeline.cmd_cluster(),
        Command::Curve => pipeline.cmd_curve(),
        Command::Stadro => pipeline.cmd_stadro(),
        Command::Stadre => pipeline.cmd_stadre(),
        Command::Report => pipeline.cmd_report(),
    }
}
