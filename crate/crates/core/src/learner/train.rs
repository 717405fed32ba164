use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::demo::{DemoStore, TransitionSource};
use super::dqn::{batch_composition, greedy_action, BatchComposition, sample_batch, select_action, update_step, QFunction, SgdMomentum};
use super::env::{episode_seed, TeamEnv};
use super::net::{DuelingQNet, NetShape};
use super::replay::ReplayBuffer;
use super::{LearnerError, TrainConfig, Variant};
use crate::mdp::{ObservationLayout, NUM_ACTIONS};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::sim::{EpisodeConfig, Outcome};

/// Linear decay from `eps_start` to `eps_end` over `eps_decay_episodes`.
pub fn epsilon_at(cfg: &TrainConfig, episode: u64) -> f64 {
    if cfg.eps_decay_episodes == 0 {
        return cfg.eps_end;
    }
    let frac = (episode as f64 / cfg.eps_decay_episodes as f64).min(1.0);
    cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// Training episodes completed when the evaluation ran.
    pub episode: u64,
    pub success_rate: f64,
}

/// Evaluation series of one training seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seed: u64,
    pub points: Vec<EvalPoint>,
}

impl EvalReport {
    pub fn best(&self) -> Option<EvalPoint> {
        self.points.iter().copied().reduce(|a, b| if b.success_rate > a.success_rate { b } else { a })
    }

    /// CSV rows `seed,episode,success_rate`, without header.
    pub fn csv_rows(&self) -> String {
        self.points.iter().map(|p| format!("{},{},{}\n", self.seed, p.episode, p.success_rate)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub report: EvalReport,
    /// One per evaluation point, in order.
    pub checkpoints: Vec<Checkpoint>,
    pub updates: u64,
    pub transitions: u64,
}

impl RunResult {
    /// Checkpoint with the highest evaluation success rate; earliest wins ties.
    pub fn best_checkpoint(&self) -> Option<&Checkpoint> {
        self.checkpoints.iter().reduce(|a, b| if b.success_rate > a.success_rate { b } else { a })
    }
}

/// Progress callbacks; shared across seeds trained in parallel.
pub trait TrainHooks: Sync {
    fn on_episode(&self, _seed: u64, _episode: u64, _outcome: Outcome) {}
    fn on_eval(&self, _seed: u64, _point: EvalPoint, _checkpoint: &Checkpoint) {}
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoHooks;

impl TrainHooks for NoHooks {}

#[derive(Debug, Clone, Copy)]
pub enum EvalPolicy<'a> {
    Heuristic,
    /// Shared network acting greedily for every blue UAV.
    Greedy(&'a DuelingQNet),
}

fn play_greedy(env: &mut TeamEnv, net: &DuelingQNet) -> Result<Outcome, LearnerError> {
    let n = env.blue_ids().len();
    loop {
        let obs: Vec<f64> = env.observations().concat();
        let q = net.q_batch(&obs, n);
        let actions: Vec<usize> = q.chunks_exact(NUM_ACTIONS).map(greedy_action).collect();
        if let Some(o) = env.step(&actions)?.outcome {
            return Ok(o);
        }
    }
}

/// Blue success rate over `n` episodes seeded `episode_seed(seed, i)`.
/// No exploration and no parameter updates.
pub fn evaluate(policy: EvalPolicy<'_>, scenario: &Arc<EpisodeConfig>, n: usize, seed: u64) -> Result<f64, LearnerError> {
    if n == 0 {
        return Err(LearnerError::Config("evaluation needs at least one episode".into()));
    }
    let wins = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = TeamEnv::new(scenario.clone(), episode_seed(seed, i))?;
            let outcome = match policy {
                EvalPolicy::Heuristic => env.run_heuristic()?,
                EvalPolicy::Greedy(net) => play_greedy(&mut env, net)?,
            };
            Ok(outcome.blue_won() as usize)
        })
        .collect::<Result<Vec<usize>, LearnerError>>()?
        .into_iter()
        .sum::<usize>();
    Ok(wins as f64 / n as f64)
}

fn check_demos<'a>(cfg: &TrainConfig, demos: Option<&'a DemoStore>) -> Result<&'a DemoStore, LearnerError> {
    static EMPTY: std::sync::OnceLock<DemoStore> = std::sync::OnceLock::new();
    match (cfg.variant, demos) {
        (Variant::Plain, Some(_)) => Err(LearnerError::Config("plain variant does not take demonstrations".into())),
        (Variant::Plain, None) => Ok(EMPTY.get_or_init(DemoStore::default)),
        (_, None) => Err(LearnerError::Config("demonstration variants require a demo store".into())),
        (_, Some(d)) => Ok(d),
    }
}

/// The demo store to sample from and the batch composition, checking that
/// every demonstration pool can fill its share of a batch.
pub(super) fn demo_pools<'a>(
    cfg: &TrainConfig,
    demos: Option<&'a DemoStore>,
) -> Result<(&'a DemoStore, BatchComposition), LearnerError> {
    let demos = check_demos(cfg, demos)?;
    let comp = batch_composition(cfg.variant, cfg.demo_ratio, cfg.batch_size);
    for (source, needed) in [(TransitionSource::DemoHuman, comp.human), (TransitionSource::DemoAgent, comp.agent)] {
        if demos.count(source) < needed {
            return Err(LearnerError::InsufficientPool {
                pool: if source == TransitionSource::DemoHuman { "demo_human" } else { "demo_agent" },
                needed,
                available: demos.count(source),
            });
        }
    }
    Ok((demos, comp))
}

/// Trains one seed. Rollouts are sequential, so the result is a pure
/// function of `(cfg, scenario, demos, seed)`.
pub fn train_seed(
    cfg: &TrainConfig,
    scenario: &Arc<EpisodeConfig>,
    demos: Option<&DemoStore>,
    seed: u64,
    hooks: &dyn TrainHooks,
) -> Result<RunResult, LearnerError> {
    cfg.validate()?;
    scenario.validate()?;
    let (demos, comp) = demo_pools(cfg, demos)?;

    let layout = ObservationLayout::new(scenario.blue_count, scenario.red_count);
    let shape = NetShape { input: layout.stacked_len(), hidden: cfg.hidden.clone(), actions: NUM_ACTIONS };
    let mut online = DuelingQNet::init(shape, &mut stream_rng(seed, Stream::NetInit, 0));
    let mut target = online.clone();
    let mut opt = SgdMomentum::new(online.num_params(), cfg.lr, cfg.momentum, cfg.max_grad_norm);
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut explore = stream_rng(seed, Stream::Exploration, 0);
    let mut sampling = stream_rng(seed, Stream::ReplaySampling, 0);
    let eval_seed = derive_seed(seed, Stream::Evaluation, 0);
    let warmup = cfg.warmup_transitions.max(comp.online);

    let mut updates = 0u64;
    let mut transitions = 0u64;
    let mut report = EvalReport { seed, points: Vec::new() };
    let mut checkpoints = Vec::new();

    for ep in 0..cfg.max_episodes {
        let eps = epsilon_at(cfg, ep);
        let mut env = TeamEnv::new(scenario.clone(), derive_seed(seed, Stream::TrainEpisode, ep))?;
        let n = env.blue_ids().len();
        let outcome = loop {
            let obs: Vec<f64> = env.observations().concat();
            let q = online.q_batch(&obs, n);
            let actions: Vec<usize> = q.chunks_exact(NUM_ACTIONS).map(|row| select_action(row, eps, &mut explore)).collect();
            let step = env.step(&actions)?;
            for t in step.transitions(TransitionSource::Online) {
                replay.push(t);
                transitions += 1;
            }
            if replay.len() >= warmup {
                let batch = sample_batch(&replay, demos, comp, &mut sampling)?;
                update_step(&mut online, &target, &mut opt, &batch, cfg.gamma, updates)?;
                updates += 1;
                if updates.is_multiple_of(cfg.target_sync_steps) {
                    target.params_mut().copy_from_slice(online.params());
                }
            }
            if let Some(o) = step.outcome {
                break o;
            }
        };
        hooks.on_episode(seed, ep + 1, outcome);

        if (ep + 1) % cfg.eval_every_episodes == 0 {
            let success_rate = evaluate(EvalPolicy::Greedy(&online), scenario, cfg.eval_episodes, eval_seed)?;
            let point = EvalPoint { episode: ep + 1, success_rate };
            let ckpt = Checkpoint { seed, episode: ep + 1, success_rate, layout, net: online.clone() };
            hooks.on_eval(seed, point, &ckpt);
            report.points.push(point);
            checkpoints.push(ckpt);
            if cfg.stop_at_success.is_some_and(|s| success_rate >= s) {
                break;
            }
        }
    }
    Ok(RunResult { report, checkpoints, updates, transitions })
}

/// Trains every seed in `cfg.seeds` as an independent job; results follow
/// the seed order.
pub fn train(
    cfg: &TrainConfig,
    scenario: &Arc<EpisodeConfig>,
    demos: Option<&DemoStore>,
    hooks: &dyn TrainHooks,
) -> Result<Vec<RunResult>, LearnerError> {
    cfg.validate()?;
    check_demos(cfg, demos)?;
    cfg.seeds.par_iter().map(|&s| train_seed(cfg, scenario, demos, s, hooks)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule_is_linear_then_flat() {
        let cfg = TrainConfig { eps_start: 1.0, eps_end: 0.1, eps_decay_episodes: 10, ..TrainConfig::default() };
        assert_eq!(epsilon_at(&cfg, 0), 1.0);
        assert!((epsilon_at(&cfg, 5) - 0.55).abs() < 1e-12);
        assert!((epsilon_at(&cfg, 10) - 0.1).abs() < 1e-12);
        assert!((epsilon_at(&cfg, 1000) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn plain_rejects_demos() {
        let scenario = Arc::new(EpisodeConfig::reduced());
        let err = train_seed(&TrainConfig::default(), &scenario, Some(&DemoStore::default()), 1, &NoHooks).unwrap_err();
        assert!(matches!(err, LearnerError::Config(_)));
    }
}
