//! Tabular laboratory for discounted state occupancy estimation.
//!
//! The crate is organized around one quantity: the discounted state
//! occupancy measure of a policy, the geometrically weighted mixture of
//! the distributions over states visited 1, 2, 3, ... steps into the
//! future. [`mdp`] holds finite MDPs and exact solvers for that measure,
//! [`estimators`] learns it from transition data with contrastive and
//! temporal-difference losses, [`gcrl`] turns learned critics into
//! goal-conditioned policies, and [`experiments`] wires those pieces
//! into reproducible benchmark runs.

pub mod error;
pub mod estimators;
pub mod experiments;
pub mod gcrl;
pub mod mdp;

pub use error::{Error, Result};
pub use experiments::{
    load_experiment_config, run_ablation, run_gcrl_experiment, run_interpolation,
    run_occupancy_benchmark, run_offline_reasoning, run_oracle_report,
    run_sample_efficiency_sweep, ExperimentConfig, ReasoningMode, RunOptions, RunSummary,
};
pub use gcrl::{
    evaluate_goal_reaching, train_gcrl, GcCriticKind, GcrlConfig, GcrlDataSource, GcrlOutcome,
};
pub use estimators::{
    c_learning_loss_and_grad, classifier_rows, ema_update, init_representations,
    mc_infonce_loss_and_grad, occupancy_from_critic, q_from_representations,
    softmax_importance_weights, successor_td_update, td_infonce_loss_and_grad, train_estimator,
    AnchorSpace, EstimatorConfig, EstimatorKind, LossFamily, McBatch, NegativesScheme,
    RepresentationPair, SuccessorTable, TdBatch, TrainOutcome, TrainRecord, WeightScheme,
};
pub use mdp::{
    apply_infonce_bellman, build_gridworld, exact_occupancy, exact_q, occupancy_error,
    occupancy_error_raw, sample_transitions, Action, Episode, GridworldSpec, MdpSpec,
    OccupancyTable, TabularMdp, TabularPolicy, TransitionDataset,
};
