use super::batch::TdBatch;
use super::config::{EstimatorConfig, NegativesScheme, WeightScheme};
use super::math::{clamped_exp, cross_entropy_soft, softmax_rows};
use super::repr::{GradAccumulator, ReprGradient, RepresentationPair};
use crate::error::{Error, Result};
use ndarray::Array2;

/// Loss value, sparse gradient, and the number of clamped exponentials.
#[derive(Debug, Clone)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grad: ReprGradient,
    pub clamped: usize,
}

/// Self-normalized importance weights from a matrix of target critic
/// values: `W = N * row-softmax(F_w)`. Every row sums to N, so the mean
/// weight is 1. Callers must treat the result as a constant (no
/// gradient flows through it).
pub fn softmax_importance_weights(f_w: &Array2<f64>) -> Array2<f64> {
    let n = f_w.nrows() as f64;
    softmax_rows(f_w.view()) * n
}

/// Label matrix for the bootstrapped cross-entropy term. Row mass has
/// mean 1 under every scheme, so the term equals log N when all critic
/// values vanish.
fn bootstrap_labels(f_w: &Array2<f64>, config: &EstimatorConfig) -> (Array2<f64>, usize) {
    let n = f_w.nrows();
    let mut clamped = 0;
    let labels = match (config.weight_scheme, config.negatives_scheme) {
        (WeightScheme::SoftmaxNormalized, NegativesScheme::NSquared) => {
            softmax_rows(f_w.view())
        }
        (WeightScheme::SoftmaxNormalized, NegativesScheme::N) => {
            let w = softmax_importance_weights(f_w);
            Array2::from_shape_fn((n, n), |(i, j)| if i == j { w[[i, i]] } else { 0.0 })
        }
        (WeightScheme::ExpUnnormalized, NegativesScheme::NSquared) => {
            Array2::from_shape_fn((n, n), |(i, j)| {
                clamped_exp(f_w[[i, j]], &mut clamped) / n as f64
            })
        }
        (WeightScheme::ExpUnnormalized, NegativesScheme::N) => {
            Array2::from_shape_fn((n, n), |(i, j)| {
                if i == j {
                    clamped_exp(f_w[[i, i]], &mut clamped)
                } else {
                    0.0
                }
            })
        }
    };
    (labels, clamped)
}

/// Temporal-difference contrastive loss on precomputed anchor indices.
/// Shared by the plain and goal-conditioned front ends.
pub(crate) fn td_core(
    online: &RepresentationPair,
    target: &RepresentationPair,
    anchors: &[usize],
    next_anchors: &[usize],
    s_next: &[usize],
    s_future: &[usize],
    gamma: f64,
    config: &EstimatorConfig,
) -> Result<LossAndGrad> {
    let n = anchors.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "contrastive batch needs at least 2 rows, got {n}"
        )));
    }
    if next_anchors.len() != n || s_next.len() != n || s_future.len() != n {
        return Err(Error::ShapeMismatch("ragged batch columns".into()));
    }
    if online.space != target.space {
        return Err(Error::ShapeMismatch(
            "online and target anchor spaces differ".into(),
        ));
    }

    let f_next = online.critic(anchors, s_next);
    let f_future = online.critic(anchors, s_future);
    let f_w = target.critic(next_anchors, s_future);

    let identity = Array2::<f64>::eye(n);
    let (ce_next, d_next) = cross_entropy_soft(f_next.view(), identity.view());
    let (labels, clamped) = bootstrap_labels(&f_w, config);
    let (ce_future, d_future) = cross_entropy_soft(f_future.view(), labels.view());

    let loss = (1.0 - gamma) * ce_next + gamma * ce_future;

    let mut acc = GradAccumulator::new(online.dim());
    acc.add_critic_grad(online, anchors, s_next, ((1.0 - gamma) * &d_next).view());
    acc.add_critic_grad(online, anchors, s_future, (gamma * &d_future).view());

    Ok(LossAndGrad {
        loss,
        grad: acc.finish(),
        clamped,
    })
}

/// TD contrastive loss and analytic gradient on a transition batch.
///
/// The first term ranks each row's true next state against the other
/// rows' next states; the second term ranks marginal future states with
/// bootstrapped labels computed from the target representations at
/// (s', a'). Labels never propagate gradients.
pub fn td_infonce_loss_and_grad(
    online: &RepresentationPair,
    target: &RepresentationPair,
    batch: &TdBatch,
    gamma: f64,
    config: &EstimatorConfig,
) -> Result<LossAndGrad> {
    batch.validate()?;
    if online.space.num_goals.is_some() {
        return Err(Error::InvalidConfig(
            "goal-conditioned representations need the goal-conditioned front end".into(),
        ));
    }
    let space = online.space;
    let anchors: Vec<usize> = batch
        .s
        .iter()
        .zip(&batch.a)
        .map(|(&s, &a)| space.anchor(s, a))
        .collect();
    let next_anchors: Vec<usize> = batch
        .s_next
        .iter()
        .zip(&batch.a_next)
        .map(|(&s, &a)| space.anchor(s, a))
        .collect();
    td_core(
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
