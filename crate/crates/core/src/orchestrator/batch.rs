use std::sync::Arc;

use rayon::prelude::*;

use super::record::{ActorBinding, EpisodeRecord};
use super::runner::{run_episode, PolicyRegistry};
use super::OrchestratorError;
use crate::learner::episode_seed;
use crate::sim::{EpisodeConfig, World};

/// Records of a batch, ordered by episode index. A failed episode does not
/// stop its siblings.
#[derive(Debug)]
pub struct BatchResult {
    pub records: Vec<Result<EpisodeRecord, OrchestratorError>>,
}

impl BatchResult {
    pub fn completed(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.records.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn wins(&self) -> usize {
        self.completed().filter(|r| r.blue_won()).count()
    }

    /// Blue wins over completed episodes.
    pub fn success_rate(&self) -> f64 {
        let n = self.completed().count();
        if n == 0 {
            0.0
        } else {
            self.wins() as f64 / n as f64
        }
    }
}

/// Bindings for a world spawned from `scenario`, as a function of the
/// world (ids depend only on team sizes).
pub type BindingFn = dyn Fn(&World) -> Vec<ActorBinding> + Sync;

/// Runs `n` headless episodes; episode `i` uses `episode_seed(base_seed, i)`.
/// `parallelism` bounds the worker pool and never affects the records.
pub fn run_batch(
    scenario: Arc<EpisodeConfig>,
    bindings: &BindingFn,
    n: usize,
    parallelism: usize,
    base_seed: u64,
    policies: &PolicyRegistry,
) -> Result<BatchResult, OrchestratorError> {
    if n == 0 {
        return Err(OrchestratorError::Usage("batch size must be >= 1".into()));
    }
    scenario.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| OrchestratorError::Usage(e.to_string()))?;
    let records = pool.install(|| {
        (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let seed = episode_seed(base_seed, i);
                let world = World::new(scenario.clone(), seed)?;
                run_episode(scenario.clone(), seed, bindings(&world), policies)
            })
            .collect()
    });
    Ok(BatchResult { records })
}
