use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use super::config::ExperimentConfig;
use super::datasets::{
    bfs_distances, held_out_pairs, same_edge_corner_pairs, skewed_endpoints,
    skewed_route_lengths, synthesize_trajectory_dataset, TrajectoryStyle,
};
use super::metrics::{mean_curve, mean_sd, MetricsRecord};
use super::plot::{line_plot_svg, PlotSeries};
use super::{run_pool, write_run_artifacts, RunOptions, RunSummary};
use crate::error::{Error, Result};
use crate::gcrl::{
    evaluate_goal_reaching, render_path_grid, train_gcrl, GcCriticKind, GcrlDataSource,
    GcrlRecord,
};
use crate::mdp::{GridworldSpec, MdpSpec, TabularPolicy};

/// The two offline-reasoning studies: stitching trains on staircase
/// trajectories and evaluates on same-edge pairs no trajectory
/// connects; shortcut trains on skewed long/short routes and compares
/// the greedy path length against the exact shortest length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReasoningMode {
    Stitching,
    Shortcut,
}

impl ReasoningMode {
    pub fn id(self) -> &'static str {
        match self {
            ReasoningMode::Stitching => "stitching",
            ReasoningMode::Shortcut => "shortcut",
        }
    }
}

fn require_gridworld(cfg: &ExperimentConfig) -> Result<&GridworldSpec> {
    match &cfg.mdp {
        MdpSpec::Gridworld(spec) => Ok(spec),
        _ => Err(Error::InvalidConfig(
            "this experiment needs a gridworld mdp".into(),
        )),
    }
}

/// Steps taken by a greedy rollout, counting a full horizon when the
/// goal was never reached.
fn greedy_length(path: &[usize], goal: usize, horizon: usize) -> usize {
    if path.last() == Some(&goal) {
        path.len() - 1
    } else {
        horizon
    }
}

struct GcCell {
    method: &'static str,
    seed: u64,
    history: Vec<GcrlRecord>,
    final_success: f64,
    path_lengths: Vec<usize>,
    render: String,
    wall: f64,
}

fn success_rows(experiment: &str, cells: &[GcCell]) -> Vec<MetricsRecord> {
    let mut rows = Vec::new();
    for cell in cells {
        for record in &cell.history {
            rows.push(MetricsRecord::new(
                experiment,
                cell.method,
                cell.seed,
                record.iteration as f64,
                "success_rate",
                record.success_rate,
            ));
        }
    }
    rows
}

fn success_series(methods: &[&'static str], cells: &[GcCell]) -> Vec<PlotSeries> {
    methods
        .iter()
        .map(|&method| {
            let curves: Vec<Vec<(f64, f64)>> = cells
                .iter()
                .filter(|c| c.method == method)
                .map(|c| {
                    c.history
                        .iter()
                        .map(|r| (r.iteration as f64, r.success_rate))
                        .collect()
                })
                .collect();
            PlotSeries::new(method, mean_curve(&curves))
        })
        .collect()
}

/// Trains the TD and MC goal-conditioned critics on the same scripted
/// dataset per seed and scores the derived policies.
pub fn run_offline_reasoning(
    cfg: &ExperimentConfig,
    mode: ReasoningMode,
    outdir: &Path,
    opts: RunOptions,
) -> Result<RunSummary> {
    cfg.validate()?;
    let spec = require_gridworld(cfg)?;
    let experiment = format!("{}.{}", cfg.experiment, mode.id());
    let mdp = cfg.mdp.build(cfg.gamma)?;

    let style = match mode {
        ReasoningMode::Stitching => TrajectoryStyle::ZPaths,
        ReasoningMode::Shortcut => TrajectoryStyle::SkewedPaths {
            p_short: cfg.reasoning.p_short,
        },
    };
    let mut datasets = Vec::with_capacity(cfg.seeds.len());
    let mut pairs_per_seed = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let dataset =
            synthesize_trajectory_dataset(spec, style, cfg.reasoning.transitions, seed)?;
        let pairs = match mode {
            ReasoningMode::Stitching => {
                let candidates = if cfg.reasoning.eval_pairs.is_empty() {
                    same_edge_corner_pairs(spec)
                } else {
                    cfg.reasoning.eval_pairs.clone()
                };
                let kept = held_out_pairs(&dataset, &candidates);
                if kept.is_empty() {
                    return Err(Error::InvalidConfig(
                        "every candidate pair co-occurs in a training trajectory".into(),
                    ));
                }
                kept
            }
            ReasoningMode::Shortcut => vec![skewed_endpoints(spec)],
        };
        datasets.push(dataset);
        pairs_per_seed.push(pairs);
    }

    let methods = [GcCriticKind::TdInfoNce, GcCriticKind::McInfoNce];
    let cells: Vec<(GcCriticKind, usize)> = methods
        .iter()
        .flat_map(|&m| (0..cfg.seeds.len()).map(move |i| (m, i)))
        .collect();
    let results = run_pool(&cells, opts.workers, |&(critic, i)| {
        let seed = cfg.seeds[i];
        let pairs = &pairs_per_seed[i];
        let mut gc = cfg.gcrl.clone();
        gc.critic = critic;
        gc.estimator.seed = seed;
        gc.eval_pairs = pairs.clone();

        let started = Instant::now();
        let out = train_gcrl(
            &mdp,
            GcrlDataSource::Offline(&datasets[i]),
            &gc,
            cfg.reasoning.iterations,
        )?;
        let wall = started.elapsed().as_secs_f64();

        let eval = evaluate_goal_reaching(
            &mdp,
            &out.policy,
            pairs,
            gc.eval_horizon,
            gc.eval_episodes,
            seed.wrapping_add(1_000_003),
        )?;
        let mut render = String::new();
        let mut path_lengths = Vec::with_capacity(eval.pairs.len());
        for pair in &eval.pairs {
            let (sx, sy) = spec.cell_of(pair.start);
            let (gx, gy) = spec.cell_of(pair.goal);
            let length = greedy_length(&pair.greedy_path, pair.goal, gc.eval_horizon);
            render.push_str(&format!(
                "({sx},{sy}) -> ({gx},{gy}): {}/{} rollouts reached the goal, greedy length {length}\n{}\n",
                pair.successes,
                pair.episodes,
                render_path_grid(spec, &pair.greedy_path, pair.goal)
            ));
            path_lengths.push(length);
        }

        Ok(GcCell {
            method: critic.id(),
            seed,
            history: out.history,
            final_success: eval.success_rate,
            path_lengths,
            render,
            wall,
        })
    })?;

    let method_ids: Vec<&'static str> = methods.iter().map(|m| m.id()).collect();
    let mut rows = success_rows(&experiment, &results);
    for cell in &results {
        rows.push(MetricsRecord::new(
            &experiment,
            cell.method,
            cell.seed,
            cfg.reasoning.iterations as f64,
            "final_success_rate",
            cell.final_success,
        ));
        if mode == ReasoningMode::Shortcut {
            rows.push(MetricsRecord::new(
                &experiment,
                cell.method,
                cell.seed,
                cfg.reasoning.iterations as f64,
                "greedy_path_length",
                cell.path_lengths[0] as f64,
            ));
        }
    }

    let mut per_method = BTreeMap::new();
    for &id in &method_ids {
        let cells_of: Vec<&GcCell> = results.iter().filter(|c| c.method == id).collect();
        let successes: Vec<f64> = cells_of.iter().map(|c| c.final_success).collect();
        let (success_mean, success_sd) = mean_sd(&successes);
        let wall: f64 = cells_of.iter().map(|c| c.wall).sum();
        let mut entry = serde_json::json!({
            "final_success_rates": successes,
            "final_success_mean": success_mean,
            "final_success_sd": success_sd,
            "wall_clock_seconds": wall,
        });
        if mode == ReasoningMode::Shortcut {
            let lengths: Vec<f64> = cells_of
                .iter()
                .map(|c| c.path_lengths[0] as f64)
                .collect();
            let (length_mean, length_sd) = mean_sd(&lengths);
            entry["greedy_path_lengths"] = serde_json::json!(lengths);
            entry["greedy_path_mean"] = serde_json::json!(length_mean);
            entry["greedy_path_sd"] = serde_json::json!(length_sd);
        }
        per_method.insert(id.to_string(), entry);
    }

    let mut summary = serde_json::json!({
        "experiment": experiment,
        "mode": mode.id(),
        "seeds": cfg.seeds,
        "iterations": cfg.reasoning.iterations,
        "dataset_transitions": cfg.reasoning.transitions,
        "eval_pairs_per_seed": pairs_per_seed,
        "methods": per_method,
    });
    let headline = match mode {
        ReasoningMode::Stitching => format!(
            "{experiment}: held-out success td_infonce {:.3} vs mc_infonce {:.3}",
            summary["methods"]["td_infonce"]["final_success_mean"]
                .as_f64()
                .unwrap(),
            summary["methods"]["mc_infonce"]["final_success_mean"]
                .as_f64()
                .unwrap(),
        ),
        ReasoningMode::Shortcut => {
            let (start, goal) = skewed_endpoints(spec);
            let shortest = bfs_distances(spec, start)?[goal]
                .expect("goal reachable on a scripted grid");
            let (long_route, _) = skewed_route_lengths(spec);
            summary["bfs_shortest"] = serde_json::json!(shortest);
            summary["long_route"] = serde_json::json!(long_route);
            format!(
                "{experiment}: greedy path td_infonce {:.1} vs mc_infonce {:.1} (shortest {shortest}, long route {long_route})",
                summary["methods"]["td_infonce"]["greedy_path_mean"]
                    .as_f64()
                    .unwrap(),
                summary["methods"]["mc_infonce"]["greedy_path_mean"]
                    .as_f64()
                    .unwrap(),
            )
        }
    };

    let svg = line_plot_svg(
        &format!("{} success", mode.id()),
        "iteration",
        "success rate",
        &success_series(&method_ids, &results),
        false,
        false,
    );
    let texts: Vec<(String, String)> = results
        .iter()
        .map(|c| {
            (
                format!("paths_{}_{}_seed{}.txt", mode.id(), c.method, c.seed),
                c.render.clone(),
            )
        })
        .collect();
    write_run_artifacts(
        outdir,
        &rows,
        &summary,
        &[("success_curves.svg".to_string(), svg)],
        &texts,
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

/// Trains the configured goal-conditioned critic and actor per seed,
/// offline on a uniform-policy dataset or with online collection, and
/// exports the learned policies.
pub fn run_gcrl_experiment(
    cfg: &ExperimentConfig,
    outdir: &Path,
    opts: RunOptions,
) -> Result<RunSummary> {
    cfg.validate()?;
    let experiment = format!("{}.gcrl", cfg.experiment);
    let mdp = cfg.mdp.build(cfg.gamma)?;

    let results = run_pool(&cfg.seeds, opts.workers, |&seed| {
        let mut gc = cfg.gcrl.clone();
        gc.estimator.seed = seed;
        let started = Instant::now();
        let out = if cfg.gcrl_online {
            train_gcrl(&mdp, GcrlDataSource::Online, &gc, cfg.gcrl_iterations)?
        } else {
            let policy = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
            let dataset = crate::mdp::sample_transitions(
                &mdp,
                &policy,
                cfg.dataset_transitions,
                cfg.episode_len,
                seed,
            )?;
            train_gcrl(
                &mdp,
                GcrlDataSource::Offline(&dataset),
                &gc,
                cfg.gcrl_iterations,
            )?
        };
        let wall = started.elapsed().as_secs_f64();
        Ok((seed, out, wall))
    })?;

    let mut rows = Vec::new();
    for (seed, out, _) in &results {
        for record in &out.history {
            let x = record.iteration as f64;
            rows.push(MetricsRecord::new(
                &experiment,
                cfg.gcrl.critic.id(),
                *seed,
                x,
                "success_rate",
                record.success_rate,
            ));
            rows.push(MetricsRecord::new(
                &experiment,
                cfg.gcrl.critic.id(),
                *seed,
                x,
                "critic_loss",
                record.critic_loss,
            ));
            rows.push(MetricsRecord::new(
                &experiment,
                cfg.gcrl.critic.id(),
                *seed,
                x,
                "actor_loss",
                record.actor_loss,
            ));
        }
    }

    let finals: Vec<f64> = results
        .iter()
        .filter_map(|(_, out, _)| out.history.last().map(|r| r.success_rate))
        .collect();
    let (success_mean, success_sd) = mean_sd(&finals);
    let wall: f64 = results.iter().map(|r| r.2).sum();
    let summary = serde_json::json!({
        "experiment": experiment,
        "critic": cfg.gcrl.critic.id(),
        "online": cfg.gcrl_online,
        "seeds": cfg.seeds,
        "iterations": cfg.gcrl_iterations,
        "final_success_rates": finals,
        "final_success_mean": success_mean,
        "final_success_sd": success_sd,
        "wall_clock_seconds": wall,
    });

    std::fs::create_dir_all(outdir)?;
    for (seed, out, _) in &results {
        let file = std::fs::File::create(outdir.join(format!("policy_seed{seed}.csv")))?;
        out.policy.write_csv(std::io::BufWriter::new(file))?;
    }

    let series: Vec<PlotSeries> = results
        .iter()
        .map(|(seed, out, _)| {
            PlotSeries::new(
                format!("seed {seed}"),
                out.history
                    .iter()
                    .map(|r| (r.iteration as f64, r.success_rate))
                    .collect(),
            )
        })
        .collect();
    let svg = line_plot_svg(
        "goal-reaching success",
        "iteration",
        "success rate",
        &series,
        false,
        false,
    );
    write_run_artifacts(
        outdir,
        &rows,
        &summary,
        &[("gcrl_success.svg".to_string(), svg)],
        &[],
        opts.no_plots,
    )?;

    let headline = format!(
        "{experiment}: {} final success {:.3} +/- {:.3} over {} seeds",
        cfg.gcrl.critic.id(),
        success_mean,
        success_sd,
        cfg.seeds.len()
    );
    Ok(RunSummary {
        experiment,
        headline,
        details: String::new(),
        rows,
        summary,
    })
}
