//! Goal-conditioned control on top of the learned occupancy critic:
//! hindsight-relabeled batches, critic and actor updates, training
//! loops for offline datasets and online collection, and goal-reaching
//! evaluation with plain-text path rendering.

mod batch;
mod eval;
mod policy;
mod steps;
mod train;

pub use batch::{sample_gc_batch, sample_gc_mc_batch, GcBatch, GcMcBatch};
pub use eval::{evaluate_goal_reaching, render_path_grid, GoalEvaluation, PairResult};
pub use policy::{GcPolicyParams, PolicyGradient};
pub use steps::{
    gc_actor_loss_and_grad, gc_actor_step, gc_critic_loss_and_grad, gc_critic_step,
    gc_mc_critic_loss_and_grad,
};
pub use train::{
    train_gcrl, GcCriticKind, GcrlConfig, GcrlDataSource, GcrlOutcome, GcrlRecord,
};
