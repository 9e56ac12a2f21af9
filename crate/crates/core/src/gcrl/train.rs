use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::batch::{sample_gc_batch, sample_gc_mc_batch};
use super::eval::evaluate_goal_reaching;
use super::policy::GcPolicyParams;
use super::steps::{gc_actor_step, gc_critic_step, gc_mc_critic_loss_and_grad};
use crate::error::{Error, Result};
use crate::estimators::{init_representations, AnchorSpace, EstimatorConfig, RepresentationPair};
use crate::mdp::{Episode, TabularMdp, TransitionDataset};

/// Which contrastive loss trains the goal-conditioned critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GcCriticKind {
    TdInfoNce,
    McInfoNce,
}

impl GcCriticKind {
    pub fn id(self) -> &'static str {
        match self {
            GcCriticKind::TdInfoNce => "td_infonce",
            GcCriticKind::McInfoNce => "mc_infonce",
        }
    }
}

/// Knobs for goal-conditioned training. The estimator block carries the
/// critic's batch size, dimension, learning rate, and target update
/// rate; the remaining fields steer the actor, evaluation cadence, and
/// online collection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GcrlConfig {
    pub estimator: EstimatorConfig,
    pub critic: GcCriticKind,
    pub actor_learning_rate: f64,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub eval_horizon: usize,
    /// Start/goal pairs scored at evaluation time. Empty means every
    /// ordered pair of distinct states with initial-distribution mass.
    pub eval_pairs: Vec<(usize, usize)>,
    /// Exploration rate for online episode collection.
    pub epsilon_explore: f64,
    pub online_episode_len: usize,
    pub online_episodes_per_iteration: usize,
}

impl Default for GcrlConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorConfig {
                repr_dim: 25,
                ..EstimatorConfig::default()
            },
            critic: GcCriticKind::TdInfoNce,
            actor_learning_rate: 0.5,
            eval_interval: 500,
            eval_episodes: 5,
            eval_horizon: 40,
            eval_pairs: Vec::new(),
            epsilon_explore: 0.2,
            online_episode_len: 40,
            online_episodes_per_iteration: 1,
        }
    }
}

impl GcrlConfig {
    pub fn validate(&self) -> Result<()> {
        self.estimator.validate()?;
        if self.actor_learning_rate <= 0.0 {
            return Err(Error::InvalidConfig(
                "actor_learning_rate must be positive".into(),
            ));
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 || self.eval_horizon == 0 {
            return Err(Error::InvalidConfig(
                "evaluation cadence fields must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon_explore) {
            return Err(Error::InvalidConfig(format!(
                "epsilon_explore must lie in [0, 1], got {}",
                self.epsilon_explore
            )));
        }
        if self.online_episode_len == 0 || self.online_episodes_per_iteration == 0 {
            return Err(Error::InvalidConfig(
                "online collection fields must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Where training transitions come from: a frozen dataset, or episodes
/// collected on the fly with an epsilon-greedy copy of the current
/// policy commanding random goals.
#[derive(Debug, Clone, Copy)]
pub enum GcrlDataSource<'a> {
    Offline(&'a TransitionDataset),
    Online,
}

/// One evaluation point along goal-conditioned training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcrlRecord {
    pub iteration: usize,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub success_rate: f64,
}

#[derive(Debug, Clone)]
pub struct GcrlOutcome {
    pub reps: RepresentationPair,
    pub target_reps: RepresentationPair,
    pub policy: GcPolicyParams,
    pub history: Vec<GcrlRecord>,
    pub clamped: usize,
}

fn default_eval_pairs(mdp: &TabularMdp) -> Vec<(usize, usize)> {
    let supported: Vec<usize> = (0..mdp.num_states)
        .filter(|&s| mdp.initial_dist[s] > 0.0)
        .collect();
    let mut pairs = Vec::new();
    for &s in &supported {
        for &g in &supported {
            if s != g {
                pairs.push((s, g));
            }
        }
    }
    pairs
}

fn collect_episode<R: Rng>(
    mdp: &TabularMdp,
    policy: &GcPolicyParams,
    epsilon: f64,
    len: usize,
    rng: &mut R,
) -> Episode {
    let start = crate::mdp::sample_index(
        mdp.initial_dist.as_slice().expect("contiguous"),
        rng,
    );
    let goal = crate::mdp::sample_index(
        mdp.initial_dist.as_slice().expect("contiguous"),
        rng,
    );
    let mut states = vec![start];
    let mut actions = Vec::with_capacity(len);
    let mut s = start;
    for _ in 0..len {
        let a = if rng.gen::<f64>() < epsilon {
            rng.gen_range(0..mdp.num_actions)
        } else {
            policy.sample_action(s, goal, rng)
        };
        let row = mdp.transition.slice(ndarray::s![s, a, ..]);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut next = row.len() - 1;
        for (i, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = i;
                break;
            }
        }
        actions.push(a);
        states.push(next);
        s = next;
    }
    Episode { states, actions }
}

/// Alternating critic and actor updates from relabeled batches, with a
/// target-network update each iteration and periodic goal-reaching
/// evaluations.
pub fn train_gcrl(
    mdp: &TabularMdp,
    source: GcrlDataSource<'_>,
    config: &GcrlConfig,
    iterations: usize,
) -> Result<GcrlOutcome> {
    config.validate()?;
    let ns = mdp.num_states;
    let na = mdp.num_actions;
    let space = match config.critic {
        GcCriticKind::TdInfoNce => AnchorSpace::goal_conditioned(ns, na),
        GcCriticKind::McInfoNce => AnchorSpace::plain(ns, na),
    };
    let (mut online, mut target) =
        init_representations(&config.estimator, space, config.estimator.seed)?;
    let mut policy = GcPolicyParams::uniform(ns, ns, na)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.estimator.seed);

    let eval_pairs = if config.eval_pairs.is_empty() {
        default_eval_pairs(mdp)
    } else {
        config.eval_pairs.clone()
    };

    let mut collected: Vec<Episode> = Vec::new();
    let mut buffer: Option<TransitionDataset> = None;
    if let GcrlDataSource::Offline(dataset) = source {
        if dataset.num_states != ns || dataset.num_actions != na {
            return Err(Error::ShapeMismatch(format!(
                "dataset is over {} states and {} actions, MDP has {ns} and {na}",
                dataset.num_states, dataset.num_actions
            )));
        }
    }

    let mut history = Vec::with_capacity(iterations / config.eval_interval);
    let mut clamped = 0usize;
    let gamma = mdp.discount;

    for iter in 0..iterations {
        if matches!(source, GcrlDataSource::Online) {
            for _ in 0..config.online_episodes_per_iteration {
                collected.push(collect_episode(
                    mdp,
                    &policy,
                    config.epsilon_explore,
                    config.online_episode_len,
                    &mut rng,
                ));
            }
            buffer = Some(TransitionDataset::from_episodes(
                collected.clone(),
                ns,
                na,
                "online_epsilon_greedy",
                config.estimator.seed,
            )?);
        }
        let dataset: &TransitionDataset = match source {
            GcrlDataSource::Offline(d) => d,
            GcrlDataSource::Online => buffer.as_ref().expect("online buffer"),
        };

        let (critic_loss, states, goals) = match config.critic {
            GcCriticKind::TdInfoNce => {
                let batch = sample_gc_batch(
                    dataset,
                    &policy,
                    config.estimator.batch_size,
                    &mut rng,
                )?;
                let out =
                    gc_critic_step(&mut online, &mut target, &batch, gamma, &config.estimator)?;
                clamped += out.clamped;
                (out.loss, batch.s, batch.g)
            }
            GcCriticKind::McInfoNce => {
                let batch = sample_gc_mc_batch(
                    dataset,
                    gamma,
                    config.estimator.batch_size,
                    &mut rng,
                )?;
                let out = gc_mc_critic_loss_and_grad(&online, &batch)?;
                online.apply_gradient(&out.grad, config.estimator.learning_rate);
                clamped += out.clamped;
                (out.loss, batch.s, batch.g)
            }
        };

        let actor_loss =
            gc_actor_step(&mut policy, &online, &states, &goals, config.actor_learning_rate)?;

        if (iter + 1) % config.eval_interval == 0 {
            let eval = evaluate_goal_reaching(
                mdp,
                &policy,
                &eval_pairs,
                config.eval_horizon,
                config.eval_episodes,
                config.estimator.seed.wrapping_add(iter as u64),
            )?;
            history.push(GcrlRecord {
                iteration: iter + 1,
                critic_loss,
                actor_loss,
                success_rate: eval.success_rate,
            });
        }
    }

    Ok(GcrlOutcome {
        reps: online,
        target_reps: target,
        policy,
        history,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{sample_transitions, TabularPolicy};
    use ndarray::{array, Array3};

    /// Two states, two actions: action 0 stays, action 1 swaps.
    fn toggle_mdp(gamma: f64) -> TabularMdp {
        let mut transition = Array3::<f64>::zeros((2, 2, 2));
        transition[[0, 0, 0]] = 1.0;
        transition[[1, 0, 1]] = 1.0;
        transition[[0, 1, 1]] = 1.0;
        transition[[1, 1, 0]] = 1.0;
        TabularMdp::new(transition, array![0.5, 0.5], gamma).unwrap()
    }

    fn toggle_dataset(mdp: &TabularMdp) -> TransitionDataset {
        let behavior = TabularPolicy::uniform(2, 2);
        sample_transitions(mdp, &behavior, 2_000, 20, 5).unwrap()
    }

    fn small_config(seed: u64) -> GcrlConfig {
        GcrlConfig {
            estimator: EstimatorConfig {
                batch_size: 16,
                repr_dim: 4,
                learning_rate: 0.3,
                ema_tau: 0.1,
                normalized: true,
                seed,
                ..EstimatorConfig::default()
            },
            actor_learning_rate: 0.3,
            eval_interval: 100,
            eval_episodes: 4,
            eval_horizon: 5,
            ..GcrlConfig::default()
        }
    }

    #[test]
    fn zero_iterations_leaves_parameters_untouched() {
        let mdp = toggle_mdp(0.8);
        let dataset = toggle_dataset(&mdp);
        let config = small_config(0);
        let out =
            train_gcrl(&mdp, GcrlDataSource::Offline(&dataset), &config, 0).unwrap();
        assert!(out.history.is_empty());
        let (fresh, _) = init_representations(
            &config.estimator,
            AnchorSpace::goal_conditioned(2, 2),
            0,
        )
        .unwrap();
        assert_eq!(out.reps.phi, fresh.phi);
        assert!(out.policy.logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn learns_to_toggle_between_two_states() {
        let mdp = toggle_mdp(0.8);
        let dataset = toggle_dataset(&mdp);
        let config = small_config(1);
        let out =
            train_gcrl(&mdp, GcrlDataSource::Offline(&dataset), &config, 2_000).unwrap();
        assert_eq!(out.history.len(), 20);
        let last = out.history.last().unwrap();
        assert_eq!(last.success_rate, 1.0, "history: {:?}", out.history);
        // Reaching the other state requires the swap action.
        assert_eq!(out.policy.greedy_action(0, 1), 1);
        assert_eq!(out.policy.greedy_action(1, 0), 1);
    }

    #[test]
    fn online_mode_learns_the_same_task() {
        let mdp = toggle_mdp(0.8);
        let mut config = small_config(2);
        config.online_episode_len = 12;
        let out = train_gcrl(&mdp, GcrlDataSource::Online, &config, 1_200).unwrap();
        let last = out.history.last().unwrap();
        assert_eq!(last.success_rate, 1.0, "history: {:?}", out.history);
    }

    #[test]
    fn history_cadence_matches_eval_interval() {
        let mdp = toggle_mdp(0.8);
        let dataset = toggle_dataset(&mdp);
        let mut config = small_config(3);
        config.eval_interval = 50;
        let out =
            train_gcrl(&mdp, GcrlDataSource::Offline(&dataset), &config, 175).unwrap();
        assert_eq!(out.history.len(), 3);
        assert_eq!(out.history[0].iteration, 50);
        assert_eq!(out.history[2].iteration, 150);
    }

    /// How many classifier rows put their argmax on the commanded goal
    /// or one of its grid neighbors.
    fn rows_focused_on_goal(
        reps: &RepresentationPair,
        marginal: ndarray::ArrayView1<f64>,
        spec: &crate::mdp::GridworldSpec,
    ) -> usize {
        let ns = reps.space.num_states;
        let na = reps.space.num_actions;
        let mut hits = 0;
        for g in 0..ns {
            let critic = reps.critic_table_for_goal(g);
            let rows = crate::estimators::classifier_rows(critic.view(), marginal).unwrap();
            let (gx, gy) = spec.cell_of(g);
            for s in 0..ns {
                for a in 0..na {
                    let mut best = 0;
                    for f in 1..ns {
                        if rows[[s, a, f]] > rows[[s, a, best]] {
                            best = f;
                        }
                    }
                    let (bx, by) = spec.cell_of(best);
                    if bx.abs_diff(gx) + by.abs_diff(gy) <= 1 {
                        hits += 1;
                    }
                }
            }
        }
        hits
    }

    #[test]
    fn trained_classifier_concentrates_near_the_commanded_goal() {
        let spec = crate::mdp::GridworldSpec::open(3, 3);
        let mdp = crate::mdp::build_gridworld(&spec, 0.8).unwrap();
        let behavior = TabularPolicy::uniform(9, 5);
        let dataset = sample_transitions(&mdp, &behavior, 5_000, 25, 11).unwrap();
        let marginal = dataset.empirical_marginal.clone();

        let mut befores = Vec::new();
        let mut afters = Vec::new();
        for seed in 0..3 {
            let config = GcrlConfig {
                estimator: EstimatorConfig {
                    batch_size: 16,
                    repr_dim: 8,
                    learning_rate: 0.3,
                    ema_tau: 0.1,
                    normalized: true,
                    seed,
                    ..EstimatorConfig::default()
                },
                actor_learning_rate: 0.3,
                eval_interval: 2_000,
                eval_episodes: 1,
                eval_horizon: 24,
                ..GcrlConfig::default()
            };
            let (init, _) = init_representations(
                &config.estimator,
                AnchorSpace::goal_conditioned(9, 5),
                seed,
            )
            .unwrap();
            befores.push(rows_focused_on_goal(&init, marginal.view(), &spec));
            let out =
                train_gcrl(&mdp, GcrlDataSource::Offline(&dataset), &config, 12_000)
                    .unwrap();
            afters.push(rows_focused_on_goal(&out.reps, marginal.view(), &spec));
        }
        for (b, a) in befores.iter().zip(&afters) {
            assert!(a >= b, "befores {befores:?}, afters {afters:?}");
        }
        let before_total: usize = befores.iter().sum();
        let after_total: usize = afters.iter().sum();
        assert!(
            after_total > before_total,
            "befores {befores:?}, afters {afters:?}"
        );
    }
}
