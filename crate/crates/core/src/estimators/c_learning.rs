use super::batch::TdBatch;
use super::config::{EstimatorConfig, NegativesScheme, WeightScheme};
use super::math::{clamped_exp, sigmoid, softplus};
use super::repr::{GradAccumulator, RepresentationPair};
use super::td_infonce::{softmax_importance_weights, LossAndGrad};
use crate::error::{Error, Result};
use ndarray::Array2;

/// Binary contrastive loss with a bootstrapped positive term.
///
/// Per batch row, with sigma the logistic function and the weight w
/// computed from target representations at (s', a') and held constant:
///
///   (1 - gamma) * -log sigma(f(s, a, s'))
///   + gamma * w * -log sigma(f(s, a, s_future))
///   + -log(1 - sigma(f(s, a, s_rand)))
///
/// The random negative s_rand is the next row's marginal future state.
/// Under the n_squared scheme the future and negative terms instead
/// average over all N future columns.
pub fn c_learning_loss_and_grad(
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
    if online.space != target.space {
        return Err(Error::ShapeMismatch(
            "online and target anchor spaces differ".into(),
        ));
    }
    let space = online.space;
    let n = batch.len();
    let nf = n as f64;
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

    let f_next = online.critic(&anchors, &batch.s_next);
    let f_future = online.critic(&anchors, &batch.s_future);
    let f_w = target.critic(&next_anchors, &batch.s_future);

    let mut clamped = 0usize;
    let weights: Array2<f64> = match config.weight_scheme {
        WeightScheme::ExpUnnormalized => {
            Array2::from_shape_fn((n, n), |(i, j)| clamped_exp(f_w[[i, j]], &mut clamped))
        }
        WeightScheme::SoftmaxNormalized => softmax_importance_weights(&f_w),
    };

    let mut loss = 0.0;
    let mut d_next = Array2::<f64>::zeros((n, n));
    let mut d_future = Array2::<f64>::zeros((n, n));

    for i in 0..n {
        let fn_ii = f_next[[i, i]];
        loss += (1.0 - gamma) * softplus(-fn_ii) / nf;
        d_next[[i, i]] += (1.0 - gamma) * (sigmoid(fn_ii) - 1.0) / nf;

        match config.negatives_scheme {
            NegativesScheme::N => {
                let ff_ii = f_future[[i, i]];
                let w = weights[[i, i]];
                loss += gamma * w * softplus(-ff_ii) / nf;
                d_future[[i, i]] += gamma * w * (sigmoid(ff_ii) - 1.0) / nf;

                let j = (i + 1) % n;
                let fr = f_future[[i, j]];
                loss += softplus(fr) / nf;
                d_future[[i, j]] += sigmoid(fr) / nf;
            }
            NegativesScheme::NSquared => {
                for j in 0..n {
                    let ff = f_future[[i, j]];
                    let w = weights[[i, j]];
                    loss += gamma * w * softplus(-ff) / (nf * nf);
                    loss += softplus(ff) / (nf * nf);
                    d_future[[i, j]] += (gamma * w * (sigmoid(ff) - 1.0) + sigmoid(ff))
                        / (nf * nf);
                }
            }
        }
    }

    let mut acc = GradAccumulator::new(online.dim());
    acc.add_critic_grad(online, &anchors, &batch.s_next, d_next.view());
    acc.add_critic_grad(online, &anchors, &batch.s_future, d_future.view());

    Ok(LossAndGrad {
        loss,
        grad: acc.finish(),
        clamped,
    })
}
