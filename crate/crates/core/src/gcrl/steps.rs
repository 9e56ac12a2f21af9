use super::batch::{GcBatch, GcMcBatch};
use super::policy::{GcPolicyParams, PolicyGradAccumulator, PolicyGradient};
use crate::error::{Error, Result};
use crate::estimators::{
    ema_update, EstimatorConfig, LossAndGrad, RepresentationPair,
};
use ndarray::{Array1, Array2};

fn check_goal_space(reps: &RepresentationPair) -> Result<()> {
    if reps.space.num_goals.is_none() {
        return Err(Error::InvalidConfig(
            "goal-conditioned steps need goal-conditioned representations".into(),
        ));
    }
    Ok(())
}

/// TD contrastive loss and gradient with goal-conditioned anchors: the
/// anchor for row i is (s_i, a_i, g_i) and the bootstrap anchor is
/// (s'_i, a'_i, g_i) under the target representations.
pub fn gc_critic_loss_and_grad(
    online: &RepresentationPair,
    target: &RepresentationPair,
    batch: &GcBatch,
    gamma: f64,
    config: &EstimatorConfig,
) -> Result<LossAndGrad> {
    batch.validate()?;
    check_goal_space(online)?;
    let space = online.space;
    let anchors: Vec<usize> = (0..batch.len())
        .map(|i| space.goal_anchor(batch.s[i], batch.a[i], batch.g[i]))
        .collect();
    let next_anchors: Vec<usize> = (0..batch.len())
        .map(|i| space.goal_anchor(batch.s_next[i], batch.a_next[i], batch.g[i]))
        .collect();
    crate::estimators::td_core(
        online,
        target,
        &anchors,
        &next_anchors,
        &batch.s_next,
        &batch.s_future,
        gamma,
        config,
    )
}

/// Monte Carlo contrastive loss: phi(s, a) classifies its own
/// hindsight goal among the batch goals, so the critic value at a
/// commanded goal is phi(s, a) dot psi(g).
pub fn gc_mc_critic_loss_and_grad(
    online: &RepresentationPair,
    batch: &GcMcBatch,
) -> Result<LossAndGrad> {
    if online.space.num_goals.is_some() {
        return Err(Error::InvalidConfig(
            "the Monte Carlo goal-conditioned critic uses plain (state, action) anchors".into(),
        ));
    }
    let space = online.space;
    let anchors: Vec<usize> = (0..batch.len())
        .map(|i| space.anchor(batch.s[i], batch.a[i]))
        .collect();
    crate::estimators::mc_core(online, &anchors, &batch.g)
}

/// One SGD step of the goal-conditioned TD critic, including the target
/// network update. Returns the pre-step loss.
pub fn gc_critic_step(
    online: &mut RepresentationPair,
    target: &mut RepresentationPair,
    batch: &GcBatch,
    gamma: f64,
    config: &EstimatorConfig,
) -> Result<LossAndGrad> {
    let out = gc_critic_loss_and_grad(online, target, batch, gamma, config)?;
    online.apply_gradient(&out.grad, config.learning_rate);
    ema_update(target, online, config.ema_tau)?;
    Ok(out)
}

/// Actor loss: expected contrastive goal likelihood, with the
/// expectation over actions computed exactly from the policy's own
/// probabilities. Row i ranks its commanded goal g_i against the other
/// rows' goals; the critic is held fixed.
pub fn gc_actor_loss_and_grad(
    policy: &GcPolicyParams,
    reps: &RepresentationPair,
    states: &[usize],
    goals: &[usize],
) -> Result<(f64, PolicyGradient)> {
    let n = states.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "contrastive batch needs at least 2 rows, got {n}"
        )));
    }
    if goals.len() != n {
        return Err(Error::ShapeMismatch("ragged batch columns".into()));
    }
    let space = reps.space;
    let num_actions = policy.num_actions();

    let mut loss = 0.0;
    let mut acc = PolicyGradAccumulator::default();
    for i in 0..n {
        let (s, g) = (states[i], goals[i]);
        // Per-action cross entropy of ranking goal i against the batch.
        let anchors: Vec<usize> = (0..num_actions)
            .map(|b| {
                if space.num_goals.is_some() {
                    space.goal_anchor(s, b, g)
                } else {
                    space.anchor(s, b)
                }
            })
            .collect();
        let logits: Array2<f64> = reps.critic(&anchors, goals);
        let per_action: Array1<f64> = Array1::from_shape_fn(num_actions, |b| {
            let row = logits.row(b);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            lse - row[i]
        });

        let probs = policy.probs(s, g);
        let row_loss = probs.dot(&per_action);
        loss += row_loss / n as f64;

        let grad = Array1::from_shape_fn(num_actions, |b| {
            probs[b] * (per_action[b] - row_loss) / n as f64
        });
        acc.add(s, g, &grad);
    }
    Ok((loss, acc.finish()))
}

/// One SGD step on the policy logits against a frozen critic. Returns
/// the pre-step loss.
pub fn gc_actor_step(
    policy: &mut GcPolicyParams,
    reps: &RepresentationPair,
    states: &[usize],
    goals: &[usize],
    learning_rate: f64,
) -> Result<f64> {
    let (loss, grad) = gc_actor_loss_and_grad(policy, reps, states, goals)?;
    policy.apply_gradient(&grad, learning_rate);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::test_support::{check_gradients, randomized, zeroed};
    use crate::estimators::{init_representations, AnchorSpace};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_gc_batch(ns: usize, na: usize, n: usize, seed: u64) -> GcBatch {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |hi: usize| (0..n).map(|_| rng.gen_range(0..hi)).collect::<Vec<_>>();
        GcBatch {
            s: draw(ns),
            a: draw(na),
            s_next: draw(ns),
            g: draw(ns),
            s_future: draw(ns),
            a_policy: draw(na),
            a_next: draw(na),
        }
    }

    fn setup(ns: usize, na: usize, dim: usize, seed: u64) -> (RepresentationPair, RepresentationPair, EstimatorConfig) {
        let config = EstimatorConfig {
            repr_dim: dim,
            ..Default::default()
        };
        let (online, target) =
            init_representations(&config, AnchorSpace::goal_conditioned(ns, na), seed).unwrap();
        (randomized(&online, seed), randomized(&target, seed + 1), config)
    }

    #[test]
    fn zero_representations_give_log_n() {
        let (online, target, config) = setup(4, 2, 3, 0);
        let online = zeroed(&online);
        let target = zeroed(&target);
        let batch = random_gc_batch(4, 2, 8, 1);
        let out = gc_critic_loss_and_grad(&online, &target, &batch, 0.7, &config).unwrap();
        assert_abs_diff_eq!(out.loss, 8.0f64.ln(), epsilon = 1e-9);
    }

    #[test]
    fn gamma_zero_matches_next_state_term_only() {
        let (online, target, config) = setup(3, 2, 4, 5);
        let batch = random_gc_batch(3, 2, 6, 7);
        let out = gc_critic_loss_and_grad(&online, &target, &batch, 0.0, &config).unwrap();
        let anchors: Vec<usize> = (0..batch.len())
            .map(|i| online.space.goal_anchor(batch.s[i], batch.a[i], batch.g[i]))
            .collect();
        let logits = online.critic(&anchors, &batch.s_next);
        let eye = Array2::<f64>::eye(batch.len());
        let (expected, _) =
            crate::estimators::cross_entropy_soft(logits.view(), eye.view());
        assert_abs_diff_eq!(out.loss, expected, epsilon = 1e-12);
    }

    #[test]
    fn critic_gradient_matches_finite_differences() {
        let (online, target, config) = setup(3, 2, 4, 11);
        let batch = random_gc_batch(3, 2, 8, 13);
        let out = gc_critic_loss_and_grad(&online, &target, &batch, 0.8, &config).unwrap();
        check_gradients(&online, &out.grad, 1e-5, 1e-4, |reps| {
            gc_critic_loss_and_grad(reps, &target, &batch, 0.8, &config)
                .unwrap()
                .loss
        });
    }

    #[test]
    fn mc_critic_gradient_matches_finite_differences() {
        let config = EstimatorConfig {
            repr_dim: 4,
            ..Default::default()
        };
        let (online, _) =
            init_representations(&config, AnchorSpace::plain(3, 2), 17).unwrap();
        let online = randomized(&online, 17);
        let batch = GcMcBatch {
            s: vec![0, 1, 2, 1],
            a: vec![0, 1, 0, 0],
            g: vec![2, 0, 1, 1],
        };
        let out = gc_mc_critic_loss_and_grad(&online, &batch).unwrap();
        check_gradients(&online, &out.grad, 1e-5, 1e-4, |reps| {
            gc_mc_critic_loss_and_grad(reps, &batch).unwrap().loss
        });
    }

    #[test]
    fn mc_critic_rejects_goal_conditioned_anchors() {
        let (online, _, _) = setup(3, 2, 4, 17);
        let batch = GcMcBatch {
            s: vec![0, 1],
            a: vec![0, 1],
            g: vec![2, 0],
        };
        assert!(gc_mc_critic_loss_and_grad(&online, &batch).is_err());
    }

    #[test]
    fn single_action_actor_gradient_is_zero() {
        let (online, _, _) = setup(3, 1, 4, 19);
        let policy = GcPolicyParams::uniform(3, 3, 1).unwrap();
        let (_, grad) =
            gc_actor_loss_and_grad(&policy, &online, &[0, 1, 2], &[2, 0, 1]).unwrap();
        for (_, row) in &grad.rows {
            for &v in row.iter() {
                assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn actor_gradient_favors_the_action_the_critic_likes() {
        let ns = 2;
        let na = 2;
        let config = EstimatorConfig {
            repr_dim: 2,
            ..Default::default()
        };
        let space = AnchorSpace::goal_conditioned(ns, na);
        let (online, _) = init_representations(&config, space, 0).unwrap();
        let mut online = zeroed(&online);
        // Give action 1 at (s=0, g=1) a +10 alignment with goal column 1
        // and action 0 a -10 alignment.
        online.psi[[1, 0]] = 1.0;
        let good = space.goal_anchor(0, 1, 1);
        let bad = space.goal_anchor(0, 0, 1);
        online.phi[[good, 0]] = 10.0;
        online.phi[[bad, 0]] = -10.0;

        let policy = GcPolicyParams::uniform(ns, ns, na).unwrap();
        let (_, grad) =
            gc_actor_loss_and_grad(&policy, &online, &[0, 1], &[1, 0]).unwrap();
        let row = grad
            .rows
            .iter()
            .find(|((s, g), _)| *s == 0 && *g == 1)
            .map(|(_, r)| r)
            .unwrap();
        assert!(row[1] < 0.0, "good action gradient {}", row[1]);
        assert!(row[0] > 0.0, "bad action gradient {}", row[0]);

        let mut trained = policy.clone();
        trained.apply_gradient(&grad, 1.0);
        assert!(trained.logits[[0, 1, 1]] > trained.logits[[0, 1, 0]]);
    }

    #[test]
    fn actor_step_descends_on_a_frozen_batch() {
        let (online, _, _) = setup(3, 3, 4, 23);
        let mut policy = GcPolicyParams::uniform(3, 3, 3).unwrap();
        let states = vec![0, 1, 2, 0];
        let goals = vec![2, 0, 1, 1];
        let before =
            gc_actor_loss_and_grad(&policy, &online, &states, &goals).unwrap().0;
        let after =
            gc_actor_step(&mut policy, &online, &states, &goals, 1e-3).unwrap();
        assert_abs_diff_eq!(after, before, epsilon = 1e-12);
        let post = gc_actor_loss_and_grad(&policy, &online, &states, &goals).unwrap().0;
        assert!(post <= before, "{post} > {before}");
    }

    #[test]
    fn actor_gradient_matches_finite_differences_on_logits() {
        let (online, _, _) = setup(3, 2, 4, 29);
        let mut policy = GcPolicyParams::uniform(3, 3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for v in policy.logits.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
        let states = vec![0, 1, 2, 1];
        let goals = vec![2, 0, 1, 1];
        let (_, grad) =
            gc_actor_loss_and_grad(&policy, &online, &states, &goals).unwrap();
        let h = 1e-5;
        for &((s, g), ref row) in &grad.rows {
            for a in 0..row.len() {
                let mut plus = policy.clone();
                plus.logits[[s, g, a]] += h;
                let mut minus = policy.clone();
                minus.logits[[s, g, a]] -= h;
                let fp = gc_actor_loss_and_grad(&plus, &online, &states, &goals)
                    .unwrap()
                    .0;
                let fm = gc_actor_loss_and_grad(&minus, &online, &states, &goals)
                    .unwrap()
                    .0;
                let fd = (fp - fm) / (2.0 * h);
                let denom = row[a].abs().max(fd.abs()).max(1e-3);
                assert!(
                    (row[a] - fd).abs() / denom < 1e-4,
                    "logit ({s},{g},{a}): analytic {} vs fd {}",
                    row[a],
                    fd
                );
            }
        }
    }
}
