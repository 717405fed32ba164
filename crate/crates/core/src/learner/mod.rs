//! Dueling double DQN with demonstration-mixed replay.
//!
//! One network is shared by every blue UAV; each UAV acts on its own
//! stacked observation and contributes its own transitions. The `Ph` and
//! `Mh` variants mix recorded demonstrations into every mini-batch.

mod checkpoint;
mod config;
mod demo;
mod dqn;
mod env;
mod net;
mod online;
mod policy;
mod replay;
pub mod stats;
mod train;

pub use checkpoint::{Checkpoint, CheckpointFile, CHECKPOINT_FORMAT};
pub use config::{TrainConfig, Variant};
pub use demo::{DemoStore, Transition, TransitionSource};
pub use dqn::{
    batch_composition, greedy_action, huber_loss_and_grad, loss_and_gradient, sample_batch, select_action, td_targets, update_step,
    BatchComposition, QFunction, SgdMomentum,
};
pub use env::{episode_seed, heuristic_controls, EnvStep, TeamEnv};
pub use net::{DuelingQNet, ForwardCache, NetShape};
pub use online::OnlineLearner;
pub use policy::PolicyActor;
pub use replay::ReplayBuffer;
pub use train::{
    epsilon_at, evaluate, train, train_seed, EvalPoint, EvalPolicy, EvalReport, NoHooks, RunResult, TrainHooks,
};

use crate::sim::ConfigError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnerError {
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ConfigError),
    #[error("insufficient {pool} transitions: need {needed}, have {available}")]
    InsufficientPool { pool: &'static str, needed: usize, available: usize },
    #[error("non-finite loss {loss} at update {update}")]
    NonFiniteLoss { loss: f64, update: u64 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}
