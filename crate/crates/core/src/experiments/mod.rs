//! Reproducible harnesses for the tabular studies: the estimation-error
//! benchmark, the sample-efficiency sweep, offline stitching and
//! shortcut discovery, the loss-design ablation, and representation
//! interpolation. Every harness writes `metrics.csv`, `summary.json`,
//! and optional SVG plots under an output directory, and is
//! deterministic given its configuration.

mod benchmark;
mod config;
mod datasets;
mod interp;
mod metrics;
mod plot;
mod reasoning;

pub use benchmark::{
    run_ablation, run_occupancy_benchmark, run_oracle_report, run_sample_efficiency_sweep,
};
pub use config::{
    apply_overrides, load_experiment_config, parse_override, ExperimentConfig, InterpConfig,
    ReasoningConfig,
};
pub use datasets::{
    bfs_distances, held_out_pairs, same_edge_corner_pairs, skewed_endpoints,
    skewed_route_lengths, synthesize_trajectory_dataset, TrajectoryStyle,
};
pub use interp::{
    interpolate_representations, run_interpolation, slerp, softmax_feature, InterpolationReport,
};
pub use metrics::{mean_curve, mean_sd, write_metrics_csv, MetricsRecord};
pub use plot::{line_plot_svg, PlotSeries};
pub use reasoning::{run_gcrl_experiment, run_offline_reasoning, ReasoningMode};

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Execution switches shared by every harness.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub workers: usize,
    pub no_plots: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            no_plots: false,
        }
    }
}

/// What a harness produced: the metric rows and summary that were
/// written to disk, plus a one-line headline for the console.
#[derive(Debug)]
pub struct RunSummary {
    pub experiment: String,
    pub headline: String,
    /// Optional multi-line console output, empty for most harnesses.
    pub details: String,
    pub rows: Vec<MetricsRecord>,
    pub summary: serde_json::Value,
}

/// Runs independent experiment cells, in order on the calling thread or
/// through a bounded worker pool. Results keep the input order either
/// way, so downstream artifacts never depend on scheduling.
pub(crate) fn run_pool<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    if workers <= 1 {
        items.iter().map(&f).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        pool.install(|| items.par_iter().map(&f).collect())
    }
}

/// Writes `metrics.csv`, `summary.json`, and any plot or text artifacts
/// into `outdir`, creating it first.
pub(crate) fn write_run_artifacts(
    outdir: &Path,
    rows: &[MetricsRecord],
    summary: &serde_json::Value,
    plots: &[(String, String)],
    texts: &[(String, String)],
    no_plots: bool,
) -> Result<()> {
    std::fs::create_dir_all(outdir)?;
    let file = std::fs::File::create(outdir.join("metrics.csv"))?;
    write_metrics_csv(std::io::BufWriter::new(file), rows)?;
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    std::fs::write(outdir.join("summary.json"), json)?;
    if !no_plots {
        for (name, svg) in plots {
            std::fs::write(outdir.join(name), svg)?;
        }
    }
    for (name, text) in texts {
        std::fs::write(outdir.join(name), text)?;
    }
    Ok(())
}
