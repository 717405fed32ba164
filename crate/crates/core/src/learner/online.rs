use super::demo::{DemoStore, Transition, TransitionSource};
use super::dqn::{sample_batch, update_step, BatchComposition, SgdMomentum};
use super::net::{DuelingQNet, NetShape};
use super::replay::ReplayBuffer;
use super::train::demo_pools;
use super::{LearnerError, TrainConfig};
use crate::mdp::{ObservationLayout, NUM_ACTIONS};
use crate::rng::{stream_rng, Stream, StreamRng};

/// The D3QN update loop fed by episodes played elsewhere, such as
/// interactive sessions, instead of its own rollouts.
pub struct OnlineLearner {
    cfg: TrainConfig,
    comp: BatchComposition,
    demos: DemoStore,
    online: DuelingQNet,
    target: DuelingQNet,
    opt: SgdMomentum,
    replay: ReplayBuffer,
    sampling: StreamRng,
    updates: u64,
    transitions: u64,
}

impl OnlineLearner {
    pub fn new(cfg: &TrainConfig, layout: ObservationLayout, demos: Option<DemoStore>, seed: u64) -> Result<Self, LearnerError> {
        cfg.validate()?;
        let (demos, comp) = demo_pools(cfg, demos.as_ref()).map(|(d, c)| (d.clone(), c))?;
        let shape = NetShape { input: layout.stacked_len(), hidden: cfg.hidden.clone(), actions: NUM_ACTIONS };
        let online = DuelingQNet::init(shape, &mut stream_rng(seed, Stream::NetInit, 0));
        Ok(Self {
            cfg: cfg.clone(),
            comp,
            demos,
            target: online.clone(),
            opt: SgdMomentum::new(online.num_params(), cfg.lr, cfg.momentum, cfg.max_grad_norm),
            online,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            sampling: stream_rng(seed, Stream::ReplaySampling, 0),
            updates: 0,
            transitions: 0,
        })
    }

    pub fn net(&self) -> &DuelingQNet {
        &self.online
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn transitions(&self) -> u64 {
        self.transitions
    }

    /// Adds the transitions of one episode to the replay buffer as online
    /// experience, then takes one gradient step per transition once the
    /// buffer is warm. Returns the number of steps taken.
    pub fn observe(&mut self, episode: impl IntoIterator<Item = Transition>) -> Result<u64, LearnerError> {
        let warmup = self.cfg.warmup_transitions.max(self.comp.online);
        let before = self.updates;
        for mut t in episode {
            if t.obs.len() != self.online.shape().input {
                return Err(LearnerError::ShapeMismatch { expected: self.online.shape().input, got: t.obs.len() });
            }
            t.source = TransitionSource::Online;
            self.replay.push(t);
            self.transitions += 1;
            if self.replay.len() < warmup {
                continue;
            }
            let batch = sample_batch(&self.replay, &self.demos, self.comp, &mut self.sampling)?;
            update_step(&mut self.online, &self.target, &mut self.opt, &batch, self.cfg.gamma, self.updates)?;
            self.updates += 1;
            if self.updates.is_multiple_of(self.cfg.target_sync_steps) {
                self.target.params_mut().copy_from_slice(self.online.params());
            }
        }
        Ok(self.updates - before)
    }
}
