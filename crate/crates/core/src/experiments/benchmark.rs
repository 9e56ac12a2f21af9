use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use super::config::ExperimentConfig;
use super::metrics::{mean_curve, mean_sd, MetricsRecord};
use super::plot::{line_plot_svg, PlotSeries};
use super::{run_pool, write_run_artifacts, RunOptions, RunSummary};
use crate::error::Result;
use crate::estimators::{
    train_estimator, EstimatorConfig, EstimatorKind, LossFamily, NegativesScheme, TrainRecord,
    WeightScheme,
};
use crate::mdp::{
    apply_infonce_bellman, exact_occupancy, sample_transitions, TabularPolicy, TransitionDataset,
};

pub(crate) fn parse_methods(ids: &[String]) -> Result<Vec<EstimatorKind>> {
    ids.iter().map(|id| id.parse()).collect()
}

/// Per-method view of the shared estimator configuration: C-learning
/// runs its canonical binary corner and the successor representation
/// takes its own step size.
pub(crate) fn method_estimator_config(
    kind: EstimatorKind,
    cfg: &ExperimentConfig,
    seed: u64,
) -> EstimatorConfig {
    let mut estimator = cfg.estimator.clone();
    estimator.seed = seed;
    match kind {
        EstimatorKind::CLearning => {
            estimator.loss_family = LossFamily::Binary;
            estimator.weight_scheme = WeightScheme::ExpUnnormalized;
            estimator.negatives_scheme = NegativesScheme::N;
        }
        EstimatorKind::SuccessorRepresentation => {
            estimator.learning_rate = cfg.sr_learning_rate;
        }
        _ => {}
    }
    estimator
}

struct Cell {
    method: String,
    seed: u64,
    history: Vec<TrainRecord>,
    final_error: f64,
    wall: f64,
}

fn history_curve(history: &[TrainRecord]) -> Vec<(f64, f64)> {
    history
        .iter()
        .map(|r| (r.step as f64, r.occupancy_error))
        .collect()
}

fn error_rows(experiment: &str, cells: &[Cell]) -> Vec<MetricsRecord> {
    let mut rows = Vec::new();
    for cell in cells {
        for record in &cell.history {
            rows.push(MetricsRecord::new(
                experiment,
                &cell.method,
                cell.seed,
                record.step as f64,
                "occupancy_error",
                record.occupancy_error,
            ));
        }
    }
    rows
}

fn method_summaries(methods: &[String], cells: &[Cell]) -> BTreeMap<String, serde_json::Value> {
    let mut out = BTreeMap::new();
    for method in methods {
        let finals: Vec<f64> = cells
            .iter()
            .filter(|c| &c.method == method)
            .map(|c| c.final_error)
            .collect();
        let wall: f64 = cells
            .iter()
            .filter(|c| &c.method == method)
            .map(|c| c.wall)
            .sum();
        let (mean, sd) = mean_sd(&finals);
        out.insert(
            method.clone(),
            serde_json::json!({
                "final_errors": finals,
                "final_mean": mean,
                "final_sd": sd,
                "wall_clock_seconds": wall,
            }),
        );
    }
    out
}

fn mean_series(methods: &[String], cells: &[Cell]) -> Vec<PlotSeries> {
    methods
        .iter()
        .map(|method| {
            let curves: Vec<Vec<(f64, f64)>> = cells
                .iter()
                .filter(|c| &c.method == method)
                .map(|c| history_curve(&c.history))
                .collect();
            PlotSeries::new(method.clone(), mean_curve(&curves))
        })
        .collect()
}

/// Trains every configured method on one fixed dataset per seed and
/// logs occupancy error against gradient steps.
pub fn run_occupancy_benchmark(
    cfg: &ExperimentConfig,
    outdir: &Path,
    opts: RunOptions,
) -> Result<RunSummary> {
    cfg.validate()?;
    let kinds = parse_methods(&cfg.methods)?;
    let experiment = format!("{}.occupancy", cfg.experiment);
    let mdp = cfg.mdp.build(cfg.gamma)?;
    let policy = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
    let datasets: Vec<TransitionDataset> = cfg
        .seeds
        .iter()
        .map(|&seed| {
            sample_transitions(&mdp, &policy, cfg.dataset_transitions, cfg.episode_len, seed)
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(EstimatorKind, usize)> = kinds
        .iter()
        .flat_map(|&kind| (0..cfg.seeds.len()).map(move |i| (kind, i)))
        .collect();
    let results = run_pool(&cells, opts.workers, |&(kind, i)| {
        let seed = cfg.seeds[i];
        let estimator = method_estimator_config(kind, cfg, seed);
        let started = Instant::now();
        let out = train_estimator(
            kind,
            &mdp,
            &policy,
            &datasets[i],
            &estimator,
            cfg.steps,
            cfg.eval_interval,
        )?;
        Ok(Cell {
            method: kind.id().to_string(),
            seed,
            history: out.history,
            final_error: out.final_error,
            wall: started.elapsed().as_secs_f64(),
        })
    })?;

    let methods: Vec<String> = kinds.iter().map(|k| k.id().to_string()).collect();
    let rows = error_rows(&experiment, &results);
    let per_method = method_summaries(&methods, &results);
    let headline = format!(
        "{experiment}: final mean error {}",
        methods
            .iter()
            .map(|m| format!("{m} {:.3e}", per_method[m]["final_mean"].as_f64().unwrap()))
            .collect::<Vec<_>>()
            .join(" | ")
    );
    let summary = serde_json::json!({
        "experiment": experiment,
        "seeds": cfg.seeds,
        "dataset_transitions": cfg.dataset_transitions,
        "steps": cfg.steps,
        "methods": per_method,
    });

    let svg = line_plot_svg(
        "occupancy estimation error",
        "gradient step",
        "mean absolute error",
        &mean_series(&methods, &results),
        false,
        true,
    );
    write_run_artifacts(
        outdir,
        &rows,
        &summary,
        &[("error_curves.svg".to_string(), svg)],
        &[],
        opts.no_plots,
    )?;

    Ok(RunSummary {
        experiment,
        headline,
        details: String::new(),
        rows,
        summary,
    })
}

/// Fresh dataset per (size, seed) cell, shared across methods, with the
/// final error after the full step budget recorded per size.
pub fn run_sample_efficiency_sweep(
    cfg: &ExperimentConfig,
    outdir: &Path,
    opts: RunOptions,
) -> Result<RunSummary> {
    cfg.validate()?;
    let kinds = parse_methods(&cfg.methods)?;
    let experiment = format!("{}.sweep", cfg.experiment);
    let mdp = cfg.mdp.build(cfg.gamma)?;
    let policy = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);

    let mut datasets: Vec<Vec<TransitionDataset>> = Vec::with_capacity(cfg.dataset_sizes.len());
    for &size in &cfg.dataset_sizes {
        let mut per_seed = Vec::with_capacity(cfg.seeds.len());
        for &seed in &cfg.seeds {
            let dataset_seed =
                seed.wrapping_add((size as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            per_seed.push(sample_transitions(
                &mdp,
                &policy,
                size,
                cfg.episode_len,
                dataset_seed,
            )?);
        }
        datasets.push(per_seed);
    }

    let cells: Vec<(EstimatorKind, usize, usize)> = kinds
        .iter()
        .flat_map(|&kind| {
            (0..cfg.dataset_sizes.len())
                .flat_map(move |si| (0..cfg.seeds.len()).map(move |di| (kind, si, di)))
        })
        .collect();
    let results = run_pool(&cells, opts.workers, |&(kind, si, di)| {
        let seed = cfg.seeds[di];
        let estimator = method_estimator_config(kind, cfg, seed);
        let started = Instant::now();
        let out = train_estimator(
            kind,
            &mdp,
            &policy,
            &datasets[si][di],
            &estimator,
            cfg.steps,
            cfg.eval_interval,
        )?;
        Ok((kind, si, seed, out.final_error, started.elapsed().as_secs_f64()))
    })?;

    let mut rows = Vec::with_capacity(results.len());
    for &(kind, si, seed, final_error, _) in &results {
        rows.push(MetricsRecord::new(
            &experiment,
            kind.id(),
            seed,
            cfg.dataset_sizes[si] as f64,
            "occupancy_error",
            final_error,
        ));
    }

    let mut per_method = BTreeMap::new();
    let mut series = Vec::new();
    for &kind in &kinds {
        let mut means = Vec::new();
        let mut sds = Vec::new();
        for si in 0..cfg.dataset_sizes.len() {
            let finals: Vec<f64> = results
                .iter()
                .filter(|r| r.0 == kind && r.1 == si)
                .map(|r| r.3)
                .collect();
            let (mean, sd) = mean_sd(&finals);
            means.push(mean);
            sds.push(sd);
        }
        let wall: f64 = results.iter().filter(|r| r.0 == kind).map(|r| r.4).sum();
        series.push(PlotSeries::new(
            kind.id(),
            cfg.dataset_sizes
                .iter()
                .zip(&means)
                .map(|(&s, &m)| (s as f64, m))
                .collect(),
        ));
        per_method.insert(
            kind.id().to_string(),
            serde_json::json!({
                "sizes": cfg.dataset_sizes,
                "final_mean": means,
                "final_sd": sds,
                "wall_clock_seconds": wall,
            }),
        );
    }

    let headline = format!(
        "{experiment}: final error by size {}",
        kinds
            .iter()
            .map(|k| {
                let means = per_method[k.id()]["final_mean"].as_array().unwrap();
                format!(
                    "{} [{}]",
                    k.id(),
                    means
                        .iter()
                        .map(|m| format!("{:.2e}", m.as_f64().unwrap()))
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            })
            .collect::<Vec<_>>()
            .join(" | ")
    );
    let summary = serde_json::json!({
        "experiment": experiment,
        "seeds": cfg.seeds,
        "dataset_sizes": cfg.dataset_sizes,
        "steps": cfg.steps,
        "methods": per_method,
    });

    let svg = line_plot_svg(
        "sample efficiency",
        "dataset transitions",
        "final mean absolute error",
        &series,
        true,
        true,
    );
    write_run_artifacts(
        outdir,
        &rows,
        &summary,
        &[("sample_efficiency.svg".to_string(), svg)],
        &[],
        opts.no_plots,
    )?;

    Ok(RunSummary {
        experiment,
        headline,
        details: String::new(),
        rows,
        summary,
    })
}

struct AblationVariant {
    label: &'static str,
    family: LossFamily,
    weights: WeightScheme,
    negatives: NegativesScheme,
}

fn ablation_variants() -> [AblationVariant; 4] {
    [
        AblationVariant {
            label: "td_infonce",
            family: LossFamily::Categorical,
            weights: WeightScheme::SoftmaxNormalized,
            negatives: NegativesScheme::NSquared,
        },
        AblationVariant {
            label: "td_infonce_exp_weights",
            family: LossFamily::Categorical,
            weights: WeightScheme::ExpUnnormalized,
            negatives: NegativesScheme::NSquared,
        },
        AblationVariant {
            label: "td_infonce_n_negatives",
            family: LossFamily::Categorical,
            weights: WeightScheme::SoftmaxNormalized,
            negatives: NegativesScheme::N,
        },
        AblationVariant {
            label: "c_learning",
            family: LossFamily::Binary,
            weights: WeightScheme::ExpUnnormalized,
            negatives: NegativesScheme::N,
        },
    ]
}

fn family_name(family: LossFamily) -> &'static str {
    match family {
        LossFamily::Categorical => "categorical",
        LossFamily::Binary => "binary",
    }
}

fn weights_name(weights: WeightScheme) -> &'static str {
    match weights {
        WeightScheme::SoftmaxNormalized => "softmax_normalized",
        WeightScheme::ExpUnnormalized => "exp_unnormalized",
    }
}

fn negatives_name(negatives: NegativesScheme) -> &'static str {
    match negatives {
        NegativesScheme::NSquared => "n_squared",
        NegativesScheme::N => "n",
    }
}

/// The four informative corners of the loss-design grid, trained on the
/// benchmark datasets. The (categorical, softmax, n_squared) corner runs
/// the same code path and configuration as the benchmark's td_infonce.
pub fn run_ablation(cfg: &ExperimentConfig, outdir: &Path, opts: RunOptions) -> Result<RunSummary> {
    cfg.validate()?;
    let experiment = format!("{}.ablation", cfg.experiment);
    let mdp = cfg.mdp.build(cfg.gamma)?;
    let policy = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
    let datasets: Vec<TransitionDataset> = cfg
        .seeds
        .iter()
        .map(|&seed| {
            sample_transitions(&mdp, &policy, cfg.dataset_transitions, cfg.episode_len, seed)
        })
        .collect::<Result<_>>()?;

    let variants = ablation_variants();
    let cells: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|vi| (0..cfg.seeds.len()).map(move |di| (vi, di)))
        .collect();
    let results = run_pool(&cells, opts.workers, |&(vi, di)| {
        let variant = &variants[vi];
        let seed = cfg.seeds[di];
        let mut estimator = cfg.estimator.clone();
        estimator.seed = seed;
        estimator.loss_family = variant.family;
        estimator.weight_scheme = variant.weights;
        estimator.negatives_scheme = variant.negatives;
        let kind = match variant.family {
            LossFamily::Categorical => EstimatorKind::TdInfoNce,
            LossFamily::Binary => EstimatorKind::CLearning,
        };
        let started = Instant::now();
        let out = train_estimator(
            kind,
            &mdp,
            &policy,
            &datasets[di],
            &estimator,
            cfg.steps,
            cfg.eval_interval,
        )?;
        Ok(Cell {
            method: variant.label.to_string(),
            seed,
            history: out.history,
            final_error: out.final_error,
            wall: started.elapsed().as_secs_f64(),
        })
    })?;

    let labels: Vec<String> = variants.iter().map(|v| v.label.to_string()).collect();
    let rows = error_rows(&experiment, &results);
    let per_variant = method_summaries(&labels, &results);

    let mean_of = |label: &str| per_variant[label]["final_mean"].as_f64().unwrap();
    let categorical: Vec<f64> = variants
        .iter()
        .filter(|v| v.family == LossFamily::Categorical)
        .map(|v| mean_of(v.label))
        .collect();
    let binary: Vec<f64> = variants
        .iter()
        .filter(|v| v.family == LossFamily::Binary)
        .map(|v| mean_of(v.label))
        .collect();
    let (categorical_mean, _) = mean_sd(&categorical);
    let (binary_mean, _) = mean_sd(&binary);
    let gap = binary_mean - categorical_mean;
    let weight_shift = (mean_of("td_infonce_exp_weights") - mean_of("td_infonce")).abs();
    let negatives_shift = (mean_of("td_infonce_n_negatives") - mean_of("td_infonce")).abs();

    let mut table = String::from(
        "variant                     loss         weights             negatives  final error\n",
    );
    for variant in &variants {
        let summary = &per_variant[variant.label];
        table.push_str(&format!(
            "{:<27} {:<12} {:<19} {:<10} {:.3e} +/- {:.1e}\n",
            variant.label,
            family_name(variant.family),
            weights_name(variant.weights),
            negatives_name(variant.negatives),
            summary["final_mean"].as_f64().unwrap(),
            summary["final_sd"].as_f64().unwrap(),
        ));
    }
    table.push_str(&format!(
        "\ncategorical mean {categorical_mean:.3e}, binary mean {binary_mean:.3e}, gap {gap:.3e}\n\
         weight-scheme shift {weight_shift:.3e}, negatives-scheme shift {negatives_shift:.3e}\n"
    ));

    let summary = serde_json::json!({
        "experiment": experiment,
        "seeds": cfg.seeds,
        "variants": per_variant,
        "comparison": {
            "categorical_mean": categorical_mean,
            "binary_mean": binary_mean,
            "categorical_binary_gap": gap,
            "weight_scheme_shift": weight_shift,
            "negatives_scheme_shift": negatives_shift,
        },
    });
    let headline = format!(
        "{experiment}: categorical {categorical_mean:.3e} vs binary {binary_mean:.3e} \
         (weight shift {weight_shift:.1e}, negatives shift {negatives_shift:.1e})"
    );

    let svg = line_plot_svg(
        "loss-design ablation",
        "gradient step",
        "mean absolute error",
        &mean_series(&labels, &results),
        false,
        true,
    );
    write_run_artifacts(
        outdir,
        &rows,
        &summary,
        &[("ablation_curves.svg".to_string(), svg)],
        &[("ablation_table.txt".to_string(), table.clone())],
        opts.no_plots,
    )?;

    Ok(RunSummary {
        experiment,
        headline,
        details: table,
        rows,
        summary,
    })
}

/// Solves the configured MDP exactly and reports the occupancy table
/// and its Bellman residual.
pub fn run_oracle_report(cfg: &ExperimentConfig, outdir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    let experiment = format!("{}.oracle", cfg.experiment);
    let mdp = cfg.mdp.build(cfg.gamma)?;
    let policy = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
    let occupancy = exact_occupancy(&mdp, &policy)?;
    let reapplied = apply_infonce_bellman(&mdp, &policy, &occupancy)?;
    let residual = occupancy
        .probs
        .iter()
        .zip(reapplied.probs.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    std::fs::create_dir_all(outdir)?;
    let file = std::fs::File::create(outdir.join("occupancy.csv"))?;
    occupancy.write_csv(std::io::BufWriter::new(file))?;

    let (ns, na, _) = occupancy.probs.dim();
    let mut details = String::new();
    if ns * na <= 60 {
        for s in 0..ns {
            for a in 0..na {
                let row: Vec<String> = (0..ns)
                    .map(|f| format!("{:.4}", occupancy.probs[[s, a, f]]))
                    .collect();
                details.push_str(&format!("p(s_future | s={s}, a={a}) = [{}]\n", row.join(", ")));
            }
        }
    } else {
        details.push_str("occupancy table written to occupancy.csv\n");
    }

    let summary = serde_json::json!({
        "experiment": experiment,
        "num_states": ns,
        "num_actions": na,
        "gamma": cfg.gamma,
        "bellman_residual": residual,
    });
    write_run_artifacts(outdir, &[], &summary, &[], &[], true)?;

    Ok(RunSummary {
        experiment: experiment.clone(),
        headline: format!(
            "{experiment}: exact occupancy over {ns} states, Bellman residual {residual:.2e}"
        ),
        details,
        rows: Vec::new(),
        summary,
    })
}
