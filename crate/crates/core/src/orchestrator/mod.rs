//! Episode lifecycle: control-stack dispatch, recording, replay, batch
//! runs and demonstration extraction.
//!
//! Episodes are stored as newline-delimited JSON: a header line with the
//! configuration, seed and bindings, one line per step, and a footer with
//! the outcome. A record carries everything needed to re-simulate it.

mod batch;
mod demos;
mod record;
mod replay;
mod runner;
mod store;

pub use batch::{run_batch, BatchResult, BindingFn};
pub use demos::{build_demo_store, episode_transitions, DemoFilter, DemoSummary};
pub use record::{
    ActorBinding, EpisodeFooter, EpisodeHeader, EpisodeMode, EpisodeRecord, PauseSpan, StepRecord, UavStep,
    EPISODE_FORMAT,
};
pub use replay::replay_episode;
pub use runner::{default_bindings, policy_bindings, run_episode, EpisodeRunner, PolicyRegistry};
pub use store::{load_record, load_records, IndexEntry, RunStore};

use crate::sim::{ConfigError, StepError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Scenario(#[from] ConfigError),
    #[error("binding error: {0}")]
    Binding(String),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("incompatible record: {0}")]
    Incompatible(String),
    #[error("replay diverged at step {t}: {detail}")]
    Integrity { t: u64, detail: String },
    #[error("malformed record: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("no demonstrations: {0}")]
    EmptyDemos(String),
    #[error("usage error: {0}")]
    Usage(String),
}
