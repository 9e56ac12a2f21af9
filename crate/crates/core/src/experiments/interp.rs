use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ExperimentConfig;
use super::datasets::bfs_distances;
use super::metrics::{mean_curve, MetricsRecord};
use super::plot::{line_plot_svg, PlotSeries};
use super::{run_pool, write_run_artifacts, RunOptions, RunSummary};
use crate::error::{Error, Result};
use crate::estimators::RepresentationPair;
use crate::gcrl::{render_path_grid, train_gcrl, GcCriticKind, GcrlDataSource};
use crate::mdp::{sample_transitions, MdpSpec, TabularPolicy};

/// Spherical linear interpolation between unit vectors. Identical
/// endpoints return `u` for every coefficient; antipodal endpoints have
/// no unique great circle and are rejected.
pub fn slerp(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>, alpha: f64) -> Result<Array1<f64>> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch(format!(
            "slerp endpoints have lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!(
            "interpolation alpha {alpha} outside [0, 1]"
        )));
    }
    let norm_u = u.dot(&u).sqrt();
    let norm_v = v.dot(&v).sqrt();
    if (norm_u - 1.0).abs() > 1e-6 || (norm_v - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidConfig(format!(
            "slerp expects unit endpoints, got norms {norm_u} and {norm_v}"
        )));
    }
    let cos = u.dot(&v).clamp(-1.0, 1.0);
    let eta = cos.acos();
    if eta < 1e-9 {
        return Ok(u.to_owned());
    }
    if std::f64::consts::PI - eta < 1e-9 {
        return Err(Error::Numerical(
            "slerp endpoints are antipodal".into(),
        ));
    }
    let sin_eta = eta.sin();
    let a = (((1.0 - alpha) * eta).sin()) / sin_eta;
    let b = ((alpha * eta).sin()) / sin_eta;
    Ok(u.to_owned() * a + v.to_owned() * b)
}

/// Softmax of the scaled inner products between one representation and
/// a stack of anchor representations.
pub fn softmax_feature(
    rep: ArrayView1<'_, f64>,
    anchors: ArrayView2<'_, f64>,
    scale: f64,
) -> Result<Array1<f64>> {
    if anchors.ncols() != rep.len() {
        return Err(Error::ShapeMismatch(format!(
            "anchors have dimension {}, representation has {}",
            anchors.ncols(),
            rep.len()
        )));
    }
    if anchors.nrows() == 0 {
        return Err(Error::InvalidConfig("softmax feature needs anchors".into()));
    }
    let logits = anchors.dot(&rep) * scale;
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out = logits.mapv(|l| (l - max).exp());
    let total = out.sum();
    out /= total;
    Ok(out)
}

/// Per-state representations for retrieval: the phi row of each state
/// paired with the stay-put action (and the commanded goal when the
/// space is goal-conditioned), normalized to the unit sphere.
fn state_representations(reps: &RepresentationPair, goal: usize) -> Result<Array2<f64>> {
    let ns = reps.space.num_states;
    let noop = reps.space.num_actions - 1;
    let dim = reps.phi.ncols();
    let mut table = Array2::<f64>::zeros((ns, dim));
    for s in 0..ns {
        let row_index = match reps.space.num_goals {
            Some(_) => reps.space.goal_anchor(s, noop, goal),
            None => reps.space.anchor(s, noop),
        };
        let row = reps.phi.row(row_index);
        let norm = row.dot(&row).sqrt();
        if norm <= 1e-12 {
            return Err(Error::Numerical(format!(
                "state {s} has a zero representation"
            )));
        }
        table.row_mut(s).assign(&row.mapv(|x| x / norm));
    }
    Ok(table)
}

/// States retrieved along the interpolation path, one per coefficient,
/// for the spherical and the softmax-feature branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterpolationReport {
    pub slerp_states: Vec<usize>,
    pub softmax_states: Vec<usize>,
}

/// Interpolates between the representations of `start` and `goal` and
/// retrieves the nearest state at every coefficient: by spherical
/// distance for the slerp branch, by Euclidean distance between softmax
/// features against `anchor_count` randomly chosen anchor states for
/// the nonparametric branch.
pub fn interpolate_representations(
    reps: &RepresentationPair,
    start: usize,
    goal: usize,
    anchor_count: usize,
    alphas: &[f64],
    seed: u64,
) -> Result<InterpolationReport> {
    let ns = reps.space.num_states;
    if start >= ns || goal >= ns {
        return Err(Error::InvalidConfig(format!(
            "interpolation endpoints ({start}, {goal}) outside {ns} states"
        )));
    }
    if anchor_count == 0 {
        return Err(Error::InvalidConfig("anchor_count must be positive".into()));
    }
    let table = state_representations(reps, goal)?;

    let mut slerp_states = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let blend = slerp(table.row(start), table.row(goal), alpha)?;
        let mut best = 0;
        let mut best_cos = f64::NEG_INFINITY;
        for s in 0..ns {
            let cos = table.row(s).dot(&blend);
            if cos > best_cos {
                best_cos = cos;
                best = s;
            }
        }
        slerp_states.push(best);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = anchor_count.min(ns);
    let picks = rand::seq::index::sample(&mut rng, ns, count);
    let mut anchors = Array2::<f64>::zeros((count, table.ncols()));
    for (i, s) in picks.iter().enumerate() {
        anchors.row_mut(i).assign(&table.row(s));
    }
    let features: Vec<Array1<f64>> = (0..ns)
        .map(|s| softmax_feature(table.row(s), anchors.view(), reps.scale))
        .collect::<Result<_>>()?;

    let mut softmax_states = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let blend = &features[start] * (1.0 - alpha) + &features[goal] * alpha;
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for s in 0..ns {
            let diff = &features[s] - &blend;
            let dist = diff.dot(&diff);
            if dist < best_dist {
                best_dist = dist;
                best = s;
            }
        }
        softmax_states.push(best);
    }

    Ok(InterpolationReport {
        slerp_states,
        softmax_states,
    })
}

fn distance_of(bfs: &[Option<usize>], state: usize) -> f64 {
    bfs[state].map_or(f64::INFINITY, |d| d as f64)
}

fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

/// Trains a goal-conditioned critic per seed, interpolates between the
/// configured endpoint representations, and scores the retrieved states
/// by their exact distance to the goal.
pub fn run_interpolation(
    cfg: &ExperimentConfig,
    outdir: &Path,
    opts: RunOptions,
) -> Result<RunSummary> {
    cfg.validate()?;
    let spec = match &cfg.mdp {
        MdpSpec::Gridworld(spec) => spec,
        _ => {
            return Err(Error::InvalidConfig(
                "this experiment needs a gridworld mdp".into(),
            ))
        }
    };
    let experiment = format!("{}.interp", cfg.experiment);
    let mdp = cfg.mdp.build(cfg.gamma)?;
    let start = cfg.interp.start.unwrap_or_else(|| spec.index(0, 0));
    let goal = cfg
        .interp
        .goal
        .unwrap_or_else(|| spec.index(spec.width - 1, spec.height - 1));
    let bfs = bfs_distances(spec, goal)?;

    // Sort the coefficient grid so the monotonicity check reads along
    // the path from start to goal.
    let mut alphas = cfg.interp.alphas.clone();
    alphas.sort_by(|a, b| a.partial_cmp(b).expect("finite alphas"));

    let results = run_pool(&cfg.seeds, opts.workers, |&seed| {
        let policy = TabularPolicy::uniform(mdp.num_states, mdp.num_actions);
        let dataset = sample_transitions(
            &mdp,
            &policy,
            cfg.dataset_transitions,
            cfg.episode_len,
            seed,
        )?;
        let mut gc = cfg.gcrl.clone();
        gc.critic = GcCriticKind::TdInfoNce;
        gc.estimator.seed = seed;
        gc.eval_pairs = vec![(start, goal)];
        let out = train_gcrl(
            &mdp,
            GcrlDataSource::Offline(&dataset),
            &gc,
            cfg.interp.train_iterations,
        )?;
        let report = interpolate_representations(
            &out.reps,
            start,
            goal,
            cfg.interp.anchor_count,
            &alphas,
            seed,
        )?;
        Ok((seed, report))
    })?;

    let mut rows = Vec::new();
    let mut per_seed = Vec::new();
    let mut slerp_monotone = 0usize;
    let mut softmax_monotone = 0usize;
    let mut endpoints_exact = 0usize;
    let mut texts = Vec::new();
    for (seed, report) in &results {
        let slerp_dist: Vec<f64> = report
            .slerp_states
            .iter()
            .map(|&s| distance_of(&bfs, s))
            .collect();
        let softmax_dist: Vec<f64> = report
            .softmax_states
            .iter()
            .map(|&s| distance_of(&bfs, s))
            .collect();
        for (i, &alpha) in alphas.iter().enumerate() {
            rows.push(MetricsRecord::new(
                &experiment,
                "slerp",
                *seed,
                alpha,
                "distance_to_goal",
                slerp_dist[i],
            ));
            rows.push(MetricsRecord::new(
                &experiment,
                "slerp",
                *seed,
                alpha,
                "retrieved_state",
                report.slerp_states[i] as f64,
            ));
            rows.push(MetricsRecord::new(
                &experiment,
                "softmax_features",
                *seed,
                alpha,
                "distance_to_goal",
                softmax_dist[i],
            ));
            rows.push(MetricsRecord::new(
                &experiment,
                "softmax_features",
                *seed,
                alpha,
                "retrieved_state",
                report.softmax_states[i] as f64,
            ));
        }

        let slerp_ok = non_increasing(&slerp_dist);
        let softmax_ok = non_increasing(&softmax_dist);
        let endpoints_ok = alphas.iter().enumerate().all(|(i, &alpha)| {
            let want = if alpha == 0.0 {
                Some(start)
            } else if alpha == 1.0 {
                Some(goal)
            } else {
                None
            };
            want.map_or(true, |w| {
                report.slerp_states[i] == w && report.softmax_states[i] == w
            })
        });
        slerp_monotone += slerp_ok as usize;
        softmax_monotone += softmax_ok as usize;
        endpoints_exact += endpoints_ok as usize;
        per_seed.push(serde_json::json!({
            "seed": seed,
            "slerp_states": report.slerp_states,
            "softmax_states": report.softmax_states,
            "slerp_distances": slerp_dist,
            "softmax_distances": softmax_dist,
            "slerp_monotone": slerp_ok,
            "softmax_monotone": softmax_ok,
            "endpoints_exact": endpoints_ok,
        }));

        let mut text = String::new();
        for (i, &alpha) in alphas.iter().enumerate() {
            let (sx, sy) = spec.cell_of(report.slerp_states[i]);
            let (fx, fy) = spec.cell_of(report.softmax_states[i]);
            text.push_str(&format!(
                "alpha {alpha}: slerp ({sx},{sy}) d={} | softmax ({fx},{fy}) d={}\n",
                slerp_dist[i], softmax_dist[i]
            ));
        }
        text.push_str("\nslerp retrievals:\n");
        text.push_str(&render_path_grid(spec, &report.slerp_states, goal));
        text.push_str("\nsoftmax retrievals:\n");
        text.push_str(&render_path_grid(spec, &report.softmax_states, goal));
        texts.push((format!("interp_seed{seed}.txt"), text));
    }

    let seeds = cfg.seeds.len();
    let summary = serde_json::json!({
        "experiment": experiment,
        "start": start,
        "goal": goal,
        "alphas": alphas,
        "train_iterations": cfg.interp.train_iterations,
        "anchor_count": cfg.interp.anchor_count,
        "per_seed": per_seed,
        "slerp_monotone_seeds": slerp_monotone,
        "softmax_monotone_seeds": softmax_monotone,
        "endpoints_exact_seeds": endpoints_exact,
    });
    let headline = format!(
        "{experiment}: monotone retrieval slerp {slerp_monotone}/{seeds}, \
         softmax {softmax_monotone}/{seeds}, endpoints exact {endpoints_exact}/{seeds}"
    );

    let slerp_curves: Vec<Vec<(f64, f64)>> = results
        .iter()
        .map(|(_, r)| {
            alphas
                .iter()
                .zip(&r.slerp_states)
                .map(|(&a, &s)| (a, distance_of(&bfs, s)))
                .collect()
        })
        .collect();
    let softmax_curves: Vec<Vec<(f64, f64)>> = results
        .iter()
        .map(|(_, r)| {
            alphas
                .iter()
                .zip(&r.softmax_states)
                .map(|(&a, &s)| (a, distance_of(&bfs, s)))
                .collect()
        })
        .collect();
    let series = vec![
        PlotSeries::new("slerp", mean_curve(&slerp_curves)),
        PlotSeries::new("softmax_features", mean_curve(&softmax_curves)),
    ];
    let svg = line_plot_svg(
        "representation interpolation",
        "alpha",
        "steps to goal",
        &series,
        false,
        false,
    );
    write_run_artifacts(
        outdir,
        &rows,
        &summary,
        &[("interp_distance.svg".to_string(), svg)],
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::AnchorSpace;
    use crate::mdp::GridworldSpec;
    use ndarray::array;

    #[test]
    fn slerp_keeps_unit_norm_and_halves_the_right_angle() {
        let u = array![1.0, 0.0];
        let v = array![0.0, 1.0];
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let blend = slerp(u.view(), v.view(), alpha).expect("slerp");
            let norm = blend.dot(&blend).sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "alpha {alpha}: norm {norm}");
        }
        let mid = slerp(u.view(), v.view(), 0.5).expect("slerp");
        let expected = 1.0 / 2.0f64.sqrt();
        assert!((mid[0] - expected).abs() < 1e-12);
        assert!((mid[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn slerp_with_identical_endpoints_returns_the_endpoint() {
        let u = array![0.6, 0.8];
        for alpha in [0.0, 0.3, 1.0] {
            let blend = slerp(u.view(), u.view(), alpha).expect("slerp");
            assert_eq!(blend, u);
        }
    }

    #[test]
    fn slerp_rejects_bad_endpoints() {
        let u = array![2.0, 0.0];
        let unit = array![1.0, 0.0];
        assert!(slerp(u.view(), unit.view(), 0.5).is_err());
        let anti = array![-1.0, 0.0];
        assert!(slerp(unit.view(), anti.view(), 0.5).is_err());
    }

    #[test]
    fn equal_inner_products_give_a_uniform_softmax_feature() {
        let rep = array![1.0, 0.0];
        let anchors = array![[0.0, 1.0], [0.0, -1.0], [0.0, 0.5]];
        let feature = softmax_feature(rep.view(), anchors.view(), 3.0).expect("feature");
        for &p in feature.iter() {
            assert!((p - 1.0 / 3.0).abs() < 1e-9);
        }
        assert!((feature.sum() - 1.0).abs() < 1e-9);
    }

    fn one_hot_reps(ns: usize) -> RepresentationPair {
        let space = AnchorSpace::goal_conditioned(ns, 2);
        let mut phi = ndarray::Array2::<f64>::zeros((space.num_anchors(), ns));
        for s in 0..ns {
            for a in 0..2 {
                for g in 0..ns {
                    phi[[space.goal_anchor(s, a, g), s]] = 1.0;
                }
            }
        }
        RepresentationPair {
            space,
            phi: phi.clone(),
            psi: ndarray::Array2::<f64>::zeros((ns, ns)),
            normalized: true,
            scale: 10.0,
        }
    }

    #[test]
    fn interpolation_endpoints_retrieve_the_endpoints() {
        let reps = one_hot_reps(4);
        let report =
            interpolate_representations(&reps, 1, 3, 4, &[0.0, 0.25, 0.75, 1.0], 0)
                .expect("interpolate");
        assert_eq!(report.slerp_states[0], 1);
        assert_eq!(report.softmax_states[0], 1);
        assert_eq!(*report.slerp_states.last().unwrap(), 3);
        assert_eq!(*report.softmax_states.last().unwrap(), 3);
        assert_eq!(report.slerp_states[1], 1, "small alpha stays near the start");
        assert_eq!(report.slerp_states[2], 3, "large alpha lands near the goal");
    }

    #[test]
    fn interpolation_harness_writes_artifacts_and_exact_endpoints() {
        let dir = tempfile::tempdir().expect("tempdir");
        let cfg = ExperimentConfig {
            mdp: MdpSpec::Gridworld(GridworldSpec::open(3, 3)),
            seeds: vec![0],
            dataset_transitions: 400,
            episode_len: 20,
            gcrl: crate::gcrl::GcrlConfig {
                estimator: crate::estimators::EstimatorConfig {
                    batch_size: 8,
                    repr_dim: 4,
                    normalized: true,
                    ..Default::default()
                },
                eval_interval: 50,
                eval_episodes: 1,
                eval_horizon: 8,
                ..Default::default()
            },
            interp: super::super::config::InterpConfig {
                anchor_count: 9,
                alphas: vec![0.0, 0.5, 1.0],
                train_iterations: 60,
                start: None,
                goal: None,
            },
            ..Default::default()
        };
        let run = run_interpolation(&cfg, dir.path(), RunOptions::default()).expect("interp");
        assert_eq!(run.summary["endpoints_exact_seeds"].as_u64(), Some(1));
        assert!(dir.path().join("interp_seed0.txt").is_file());
        assert!(dir.path().join("interp_distance.svg").is_file());
        let zero_rows: Vec<&MetricsRecord> = run
            .rows
            .iter()
            .filter(|r| r.x == 0.0 && r.metric == "retrieved_state")
            .collect();
        assert!(zero_rows.iter().all(|r| r.value == 0.0), "alpha 0 retrieves the start");
    }
}
