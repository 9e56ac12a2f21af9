//! Command line front end for the occupancy estimation laboratory.
//!
//! Every subcommand resolves one [`ExperimentConfig`] (defaults, then an
//! optional JSON file, then `-s key=value` overrides), snapshots it as
//! `resolved_config.json` in the output directory, and runs one harness
//! from the core crate. Exit code 2 flags configuration mistakes, exit
//! code 3 flags failures while running.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use occlab::experiments::{
    load_experiment_config, parse_override, run_ablation, run_gcrl_experiment, run_interpolation,
    run_occupancy_benchmark, run_offline_reasoning, run_oracle_report,
    run_sample_efficiency_sweep, ExperimentConfig, ReasoningMode, RunOptions, RunSummary,
};

#[derive(Parser)]
#[command(name = "occlab", version, about = "Tabular occupancy estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (JSON). Missing fields take their defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one configuration field, e.g. `-s gamma=0.95` or
    /// `-s mdp.width=10`. Values parse as JSON, bare words as strings.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Seeds to run, comma separated. Shorthand for `-s seeds=[...]`.
    #[arg(long, value_name = "LIST")]
    seeds: Option<String>,

    /// Output directory. Defaults to `$OCCLAB_OUTDIR/<command>` or
    /// `runs/<command>`.
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for per-seed work. Results do not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Skip writing SVG plots.
    #[arg(long)]
    no_plots: bool,

    /// Print the resolved configuration and exit without running.
    #[arg(long)]
    dry_run: bool,

    /// Write into an output directory that already holds a run.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the occupancy measure with every configured method.
    Occupancy(RunArgs),
    /// Sweep dataset sizes and compare final estimation errors.
    Sweep(RunArgs),
    /// Train goal-conditioned policies and track success rates.
    Gcrl(RunArgs),
    /// Evaluate goal reaching on corner pairs held out of the training
    /// trajectories.
    Stitch(RunArgs),
    /// Evaluate path length on a dataset dominated by a long detour.
    Shortcut(RunArgs),
    /// Toggle loss family, weights, and negatives between the
    /// contrastive estimators.
    Ablate(RunArgs),
    /// Interpolate between learned representations and retrieve the
    /// intermediate states.
    Interp(RunArgs),
    /// Solve the configured MDP exactly and write the occupancy table.
    Oracle(RunArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Occupancy(_) => "occupancy",
            Command::Sweep(_) => "sweep",
            Command::Gcrl(_) => "gcrl",
            Command::Stitch(_) => "stitch",
            Command::Shortcut(_) => "shortcut",
            Command::Ablate(_) => "ablate",
            Command::Interp(_) => "interp",
            Command::Oracle(_) => "oracle",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Occupancy(a)
            | Command::Sweep(a)
            | Command::Gcrl(a)
            | Command::Stitch(a)
            | Command::Shortcut(a)
            | Command::Ablate(a)
            | Command::Interp(a)
            | Command::Oracle(a) => a,
        }
    }
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: anyhow::Error) -> Failure {
    Failure { code: 2, error }
}

fn runtime(error: anyhow::Error) -> Failure {
    Failure { code: 3, error }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

fn seeds_override(spec: &str) -> anyhow::Result<(String, String)> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if parts.iter().any(|p| p.is_empty() || p.parse::<u64>().is_err()) {
        return Err(anyhow!("--seeds expects comma separated integers, got `{spec}`"));
    }
    Ok(("seeds".to_string(), format!("[{}]", parts.join(","))))
}

fn resolve_config(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut overrides = Vec::with_capacity(args.set.len() + 1);
    for raw in &args.set {
        overrides.push(parse_override(raw)?);
    }
    if let Some(spec) = &args.seeds {
        overrides.push(seeds_override(spec)?);
    }
    let config = load_experiment_config(args.config.as_deref(), &overrides)?;
    Ok(config)
}

fn outdir_for(args: &RunArgs, name: &str) -> PathBuf {
    args.out.clone().unwrap_or_else(|| {
        std::env::var_os("OCCLAB_OUTDIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(name)
    })
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let name = cli.command.name();
    let args = cli.command.args();

    let config = resolve_config(args).map_err(usage)?;
    let rendered = serde_json::to_string_pretty(&config)
        .map_err(|e| runtime(e.into()))?;

    if args.dry_run {
        println!("{rendered}");
        return Ok(());
    }

    let outdir = outdir_for(args, name);
    if !args.force && outdir.join("resolved_config.json").exists() {
        return Err(usage(anyhow!(
            "output directory `{}` already holds a run (pass --force to overwrite)",
            outdir.display()
        )));
    }
    std::fs::create_dir_all(&outdir)
        .with_context(|| format!("creating `{}`", outdir.display()))
        .map_err(runtime)?;
    std::fs::write(outdir.join("resolved_config.json"), format!("{rendered}\n"))
        .map_err(|e| runtime(e.into()))?;

    let opts = RunOptions {
        workers: args.workers.max(1),
        no_plots: args.no_plots,
    };
    let summary: RunSummary = match name {
        "occupancy" => run_occupancy_benchmark(&config, &outdir, opts),
        "sweep" => run_sample_efficiency_sweep(&config, &outdir, opts),
        "gcrl" => run_gcrl_experiment(&config, &outdir, opts),
        "stitch" => run_offline_reasoning(&config, ReasoningMode::Stitching, &outdir, opts),
        "shortcut" => run_offline_reasoning(&config, ReasoningMode::Shortcut, &outdir, opts),
        "ablate" => run_ablation(&config, &outdir, opts),
        "interp" => run_interpolation(&config, &outdir, opts),
        "oracle" => run_oracle_report(&config, &outdir),
        _ => unreachable!("subcommand names are fixed"),
    }
    .map_err(|e| runtime(e.into()))?;

    println!("{}", summary.headline);
    if !summary.details.is_empty() {
        println!("{}", summary.details.trim_end());
    }
    println!("artifacts in {}", outdir.display());
    Ok(())
}
