//! Learned estimators of the discounted occupancy measure: contrastive
//! representation losses with analytic gradients, a tabular successor
//! baseline, slow-moving target parameters, and the conversions that
//! turn a trained critic back into probabilities and values.

mod batch;
mod c_learning;
mod config;
mod convert;
mod exact;
mod math;
mod mc_infonce;
mod repr;
mod successor;
mod td_infonce;
mod train;

#[cfg(test)]
pub(crate) mod test_support;

pub use batch::{sample_mc_batch, sample_td_batch, McBatch, TdBatch};
pub use c_learning::c_learning_loss_and_grad;
pub use config::{EstimatorConfig, LossFamily, NegativesScheme, WeightScheme};
pub use convert::{classifier_rows, occupancy_from_critic, q_from_representations};
pub use exact::{mc_infonce_loss_exact, optimal_critic, td_infonce_loss_exact};
pub use math::{cross_entropy_soft, log_softmax_rows, softmax_rows, EXP_CLAMP};
pub use mc_infonce::mc_infonce_loss_and_grad;
pub use repr::{
    critic_matrix, ema_update, init_representations, max_row_norm_error, AnchorSpace,
    GradAccumulator, RepresentationPair, ReprGradient,
};
pub use successor::{successor_td_update, SuccessorTable};
pub use td_infonce::{softmax_importance_weights, td_infonce_loss_and_grad, LossAndGrad};
pub use train::{
    train_estimator, write_history_csv, EstimatorKind, TrainOutcome, TrainRecord,
};

pub(crate) use mc_infonce::mc_core;
pub(crate) use td_infonce::td_core;
