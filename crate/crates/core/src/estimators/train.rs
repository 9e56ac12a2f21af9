use std::fmt;
use std::str::FromStr;

use ndarray::Array3;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::batch::{sample_mc_batch, sample_td_batch};
use super::c_learning::c_learning_loss_and_grad;
use super::config::{EstimatorConfig, LossFamily};
use super::convert::occupancy_from_critic;
use super::mc_infonce::mc_infonce_loss_and_grad;
use super::repr::{ema_update, init_representations, AnchorSpace, RepresentationPair};
use super::successor::{successor_td_update, SuccessorTable};
use super::td_infonce::td_infonce_loss_and_grad;
use crate::error::{Error, Result};
use crate::mdp::{
    apply_infonce_bellman, exact_occupancy, occupancy_error_raw, OccupancyTable, TabularMdp,
    TabularPolicy, TransitionDataset,
};

/// Every way this crate can estimate the discounted occupancy measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    TdInfoNce,
    McInfoNce,
    CLearning,
    SuccessorRepresentation,
    ExactBellmanOracle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::TdInfoNce,
        EstimatorKind::McInfoNce,
        EstimatorKind::CLearning,
        EstimatorKind::SuccessorRepresentation,
        EstimatorKind::ExactBellmanOracle,
    ];

    pub fn id(self) -> &'static str {
        match self {
            EstimatorKind::TdInfoNce => "td_infonce",
            EstimatorKind::McInfoNce => "mc_infonce",
            EstimatorKind::CLearning => "c_learning",
            EstimatorKind::SuccessorRepresentation => "successor_representation",
            EstimatorKind::ExactBellmanOracle => "exact_bellman_oracle",
        }
    }

    /// Whether the estimator learns inner-product representations that can
    /// be inspected or reused after training.
    pub fn learns_representations(self) -> bool {
        !matches!(
            self,
            EstimatorKind::SuccessorRepresentation | EstimatorKind::ExactBellmanOracle
        )
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// One evaluation point along a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainRecord {
    pub step: usize,
    pub loss: f64,
    pub occupancy_error: f64,
}

/// Everything a training run leaves behind.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<TrainRecord>,
    /// Final occupancy estimate, one row per (s, a). Rows are proper
    /// distributions for every estimator except the successor table.
    pub estimate: Array3<f64>,
    pub final_error: f64,
    /// Learned representations, for estimators that have them.
    pub reps: Option<RepresentationPair>,
    /// How many exponentials hit the safety clamp during training.
    pub clamped: usize,
}

fn check_dataset(mdp: &TabularMdp, dataset: &TransitionDataset) -> Result<()> {
    if dataset.num_states != mdp.num_states || dataset.num_actions != mdp.num_actions {
        return Err(Error::ShapeMismatch(format!(
            "dataset is over {} states and {} actions, MDP has {} and {}",
            dataset.num_states, dataset.num_actions, mdp.num_states, mdp.num_actions
        )));
    }
    Ok(())
}

/// Trains one estimator against a fixed dataset and logs its occupancy
/// error every `eval_interval` steps. The evaluated policy supplies
/// SARSA next actions for the bootstrapped methods; the Bellman oracle
/// ignores the dataset entirely and iterates the exact operator.
pub fn train_estimator(
    kind: EstimatorKind,
    mdp: &TabularMdp,
    policy: &TabularPolicy,
    dataset: &TransitionDataset,
    config: &EstimatorConfig,
    steps: usize,
    eval_interval: usize,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_dataset(mdp, dataset)?;
    if eval_interval == 0 {
        return Err(Error::InvalidConfig("eval_interval must be positive".into()));
    }
    match kind {
        EstimatorKind::TdInfoNce if config.loss_family != LossFamily::Categorical => {
            return Err(Error::InvalidConfig(
                "td_infonce trains the categorical loss family".into(),
            ));
        }
        EstimatorKind::CLearning if config.loss_family != LossFamily::Binary => {
            return Err(Error::InvalidConfig(
                "c_learning trains the binary loss family".into(),
            ));
        }
        _ => {}
    }

    let truth = exact_occupancy(mdp, policy)?;
    let marginal = dataset.empirical_marginal.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(steps / eval_interval);
    let gamma = mdp.discount;

    let mut clamped_total = 0usize;
    let space = AnchorSpace::plain(mdp.num_states, mdp.num_actions);

    let mut reps_state: Option<(RepresentationPair, RepresentationPair)> = None;
    let mut sr_state: Option<SuccessorTable> = None;
    let mut oracle_state: Option<OccupancyTable> = None;
    match kind {
        EstimatorKind::TdInfoNce | EstimatorKind::McInfoNce | EstimatorKind::CLearning => {
            reps_state = Some(init_representations(config, space, config.seed)?);
        }
        EstimatorKind::SuccessorRepresentation => {
            sr_state = Some(SuccessorTable::zeros(
                mdp.num_states,
                mdp.num_actions,
                config.learning_rate,
            )?);
        }
        EstimatorKind::ExactBellmanOracle => {
            oracle_state = Some(OccupancyTable::uniform(mdp.num_states, mdp.num_actions));
        }
    }

    let evaluate = |reps_state: &Option<(RepresentationPair, RepresentationPair)>,
                    sr_state: &Option<SuccessorTable>,
                    oracle_state: &Option<OccupancyTable>|
     -> Result<(Array3<f64>, f64)> {
        let estimate = if let Some((online, _)) = reps_state {
            occupancy_from_critic(online, marginal.view())?.probs
        } else if let Some(table) = sr_state {
            table.m.clone()
        } else {
            oracle_state.as_ref().expect("one estimator state").probs.clone()
        };
        let err = occupancy_error_raw(estimate.view(), truth.probs.view())?;
        Ok((estimate, err))
    };

    for step in 0..steps {
        let loss = match kind {
            EstimatorKind::TdInfoNce | EstimatorKind::CLearning => {
                let batch = sample_td_batch(dataset, policy, config.batch_size, &mut rng);
                let (online, target) = reps_state.as_mut().expect("reps state");
                let out = if kind == EstimatorKind::TdInfoNce {
                    td_infonce_loss_and_grad(online, target, &batch, gamma, config)?
                } else {
                    c_learning_loss_and_grad(online, target, &batch, gamma, config)?
                };
                online.apply_gradient(&out.grad, config.learning_rate);
                ema_update(target, online, config.ema_tau)?;
                clamped_total += out.clamped;
                out.loss
            }
            EstimatorKind::McInfoNce => {
                let batch = sample_mc_batch(dataset, gamma, config.batch_size, &mut rng);
                let (online, _) = reps_state.as_mut().expect("reps state");
                let out = mc_infonce_loss_and_grad(online, &batch, config)?;
                online.apply_gradient(&out.grad, config.learning_rate);
                clamped_total += out.clamped;
                out.loss
            }
            EstimatorKind::SuccessorRepresentation => {
                let table = sr_state.as_mut().expect("sr state");
                let mut residual = 0.0;
                for _ in 0..config.batch_size {
                    let idx = dataset.sample_transition_index(&mut rng);
                    let (s, a, s_next) = dataset.transition(idx);
                    let a_next = policy.sample_action(s_next, &mut rng);
                    let before = table.m.slice(ndarray::s![s, a, ..]).to_owned();
                    successor_td_update(table, (s, a, s_next), a_next, gamma);
                    let after = table.m.slice(ndarray::s![s, a, ..]);
                    let alpha = table.alpha.max(f64::MIN_POSITIVE);
                    residual += before
                        .iter()
                        .zip(after.iter())
                        .map(|(&b, &x)| ((x - b) / alpha).powi(2))
                        .sum::<f64>();
                }
                residual / config.batch_size as f64
            }
            EstimatorKind::ExactBellmanOracle => {
                let current = oracle_state.as_ref().expect("oracle state");
                let next = apply_infonce_bellman(mdp, policy, current)?;
                let sup_change = next
                    .probs
                    .iter()
                    .zip(current.probs.iter())
                    .map(|(&n, &c)| (n - c).abs())
                    .fold(0.0, f64::max);
                oracle_state = Some(next);
                sup_change
            }
        };

        if (step + 1) % eval_interval == 0 {
            let (_, err) = evaluate(&reps_state, &sr_state, &oracle_state)?;
            history.push(TrainRecord {
                step: step + 1,
                loss,
                occupancy_error: err,
            });
        }
    }

    let (estimate, final_error) = evaluate(&reps_state, &sr_state, &oracle_state)?;
    Ok(TrainOutcome {
        history,
        estimate,
        final_error,
        reps: reps_state.map(|(online, _)| online),
        clamped: clamped_total,
    })
}

/// Writes a run's evaluation history as `step,loss,occupancy_error` rows.
pub fn write_history_csv<W: std::io::Write>(mut w: W, history: &[TrainRecord]) -> Result<()> {
    writeln!(w, "step,loss,occupancy_error")?;
    for rec in history {
        writeln!(w, "{},{},{}", rec.step, rec.loss, rec.occupancy_error)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::sample_transitions;

    fn cycle_setup() -> (TabularMdp, TabularPolicy, TransitionDataset) {
        let mdp = TabularMdp::cycle(3, 0.8).unwrap();
        let policy = TabularPolicy::uniform(3, 1);
        let dataset = sample_transitions(&mdp, &policy, 600, 30, 7).unwrap();
        (mdp, policy, dataset)
    }

    #[test]
    fn method_ids_round_trip() {
        for kind in EstimatorKind::ALL {
            assert_eq!(kind.id().parse::<EstimatorKind>().unwrap(), kind);
        }
        assert!(matches!(
            "quantum_leap".parse::<EstimatorKind>(),
            Err(Error::UnknownMethod(_))
        ));
    }

    #[test]
    fn oracle_error_decays_at_the_contraction_rate() {
        let (mdp, policy, dataset) = cycle_setup();
        let config = EstimatorConfig { seed: 0, ..EstimatorConfig::default() };
        let out = train_estimator(
            EstimatorKind::ExactBellmanOracle,
            &mdp,
            &policy,
            &dataset,
            &config,
            40,
            10,
        )
        .unwrap();
        assert_eq!(out.history.len(), 4);
        for rec in &out.history {
            assert!(
                rec.occupancy_error <= mdp.discount.powi(rec.step as i32) + 1e-12,
                "step {}: {}",
                rec.step,
                rec.occupancy_error
            );
        }
        assert!(out.final_error < 1e-3);
        assert!(out.reps.is_none());
    }

    #[test]
    fn same_seed_same_history() {
        let (mdp, policy, dataset) = cycle_setup();
        let config = EstimatorConfig {
            batch_size: 8,
            repr_dim: 3,
            seed: 11,
            ..EstimatorConfig::default()
        };
        let a = train_estimator(
            EstimatorKind::TdInfoNce,
            &mdp,
            &policy,
            &dataset,
            &config,
            50,
            10,
        )
        .unwrap();
        let b = train_estimator(
            EstimatorKind::TdInfoNce,
            &mdp,
            &policy,
            &dataset,
            &config,
            50,
            10,
        )
        .unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.estimate, b.estimate);
    }

    #[test]
    fn every_learned_method_improves_on_a_small_cycle() {
        let (mdp, policy, dataset) = cycle_setup();
        for kind in [
            EstimatorKind::TdInfoNce,
            EstimatorKind::McInfoNce,
            EstimatorKind::CLearning,
            EstimatorKind::SuccessorRepresentation,
        ] {
            let config = EstimatorConfig {
                batch_size: 16,
                repr_dim: 3,
                learning_rate: if kind == EstimatorKind::SuccessorRepresentation {
                    0.1
                } else {
                    0.5
                },
                loss_family: if kind == EstimatorKind::CLearning {
                    LossFamily::Binary
                } else {
                    LossFamily::Categorical
                },
                seed: 3,
                ..EstimatorConfig::default()
            };
            let out =
                train_estimator(kind, &mdp, &policy, &dataset, &config, 1500, 500).unwrap();
            let first = out.history.first().unwrap().occupancy_error;
            assert!(
                out.final_error <= first && out.final_error < 0.02,
                "{kind}: {} -> {}",
                first,
                out.final_error
            );
            assert_eq!(out.reps.is_some(), kind.learns_representations());
        }
    }

    #[test]
    fn history_row_count_matches_the_interval() {
        let (mdp, policy, dataset) = cycle_setup();
        let config = EstimatorConfig { batch_size: 4, repr_dim: 2, ..EstimatorConfig::default() };
        let out = train_estimator(
            EstimatorKind::McInfoNce,
            &mdp,
            &policy,
            &dataset,
            &config,
            25,
            10,
        )
        .unwrap();
        assert_eq!(out.history.len(), 2);
        assert_eq!(out.history[0].step, 10);
        assert_eq!(out.history[1].step, 20);

        let mut buf = Vec::new();
        write_history_csv(&mut buf, &out.history).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,loss,occupancy_error\n"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn mismatched_loss_family_is_rejected() {
        let (mdp, policy, dataset) = cycle_setup();
        let config = EstimatorConfig {
            loss_family: LossFamily::Binary,
            ..EstimatorConfig::default()
        };
        assert!(train_estimator(
            EstimatorKind::TdInfoNce,
            &mdp,
            &policy,
            &dataset,
            &config,
            10,
            10,
        )
        .is_err());
        assert!(train_estimator(
            EstimatorKind::CLearning,
            &mdp,
            &policy,
            &dataset,
            &EstimatorConfig::default(),
            10,
            10,
        )
        .is_err());
    }

    #[test]
    fn zero_steps_returns_the_initial_estimate() {
        let (mdp, policy, dataset) = cycle_setup();
        let config = EstimatorConfig { repr_dim: 3, ..EstimatorConfig::default() };
        let out = train_estimator(
            EstimatorKind::TdInfoNce,
            &mdp,
            &policy,
            &dataset,
            &config,
            0,
            10,
        )
        .unwrap();
        assert!(out.history.is_empty());
        assert!(out.final_error > 0.0);
    }
}
