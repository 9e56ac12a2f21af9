use super::batch::McBatch;
use super::config::EstimatorConfig;
use super::math::cross_entropy_soft;
use super::repr::{GradAccumulator, RepresentationPair};
use super::td_infonce::LossAndGrad;
use crate::error::{Error, Result};
use ndarray::Array2;

/// Monte Carlo contrastive loss on precomputed anchor indices. Shared
/// by the plain and goal-conditioned front ends.
pub(crate) fn mc_core(
    online: &RepresentationPair,
    anchors: &[usize],
    s_future: &[usize],
) -> Result<LossAndGrad> {
    let n = anchors.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "contrastive batch needs at least 2 rows, got {n}"
        )));
    }
    if s_future.len() != n {
        return Err(Error::ShapeMismatch("ragged batch columns".into()));
    }

    let f_pos = online.critic(anchors, s_future);
    let identity = Array2::<f64>::eye(n);
    let (loss, dloss) = cross_entropy_soft(f_pos.view(), identity.view());

    let mut acc = GradAccumulator::new(online.dim());
    acc.add_critic_grad(online, anchors, s_future, dloss.view());

    Ok(LossAndGrad {
        loss,
        grad: acc.finish(),
        clamped: 0,
    })
}

/// Monte Carlo contrastive loss: rank each row's within-trajectory
/// future state against the other rows' futures.
pub fn mc_infonce_loss_and_grad(
    online: &RepresentationPair,
    batch: &McBatch,
    config: &EstimatorConfig,
) -> Result<LossAndGrad> {
    config.validate()?;
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
    mc_core(online, &anchors, &batch.s_future)
}
