use std::collections::BTreeMap;
use std::sync::Arc;

use super::demo::{Transition, TransitionSource};
use super::LearnerError;
use crate::agents::{heuristic_blue_policy, scripted_red_policy, ActorOutput};
use crate::mdp::{compute_reward, decode_action, encode_frame, FrameHistory};
use crate::rng::{derive_seed, stream_rng, Stream, StreamRng};
use crate::sim::{ConfigError, ControlInput, EntityId, EpisodeConfig, Event, Outcome, Team, World};

/// Seed of episode `i` in a batch started from `base`.
pub fn episode_seed(base: u64, i: u64) -> u64 {
    derive_seed(base, Stream::Episode, i)
}

/// Heuristic controls for every active blue UAV.
pub fn heuristic_controls(world: &World) -> BTreeMap<EntityId, ControlInput> {
    let cfg = world.config();
    let mode = cfg.blue.observability;
    world
        .team_uavs(Team::Blue)
        .enumerate()
        .filter(|(_, u)| u.is_active())
        .filter_map(|(rank, u)| {
            let perceived = world.perceived_entities(u.id, mode);
            let out = heuristic_blue_policy(
                &perceived,
                &u.kin,
                &u.spec,
                &world.zone,
                rank,
                cfg.blue_count,
                cfg.agents.patrol_radius,
                cfg.agents.patrol_speed,
                world.t,
                cfg.dt,
            );
            match out {
                ActorOutput::Control(c) => Some((u.id, c)),
                ActorOutput::NoOp => None,
            }
        })
        .collect()
}

/// Result of one environment step, one entry per blue UAV in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvStep {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
    pub events: Vec<Event>,
    pub outcome: Option<Outcome>,
}

impl EnvStep {
    pub fn transitions(&self, source: TransitionSource) -> impl Iterator<Item = Transition> + '_ {
        let terminal = self.outcome.is_some();
        (0..self.actions.len()).map(move |i| Transition {
            obs: self.obs[i].clone(),
            action: self.actions[i],
            reward: self.rewards[i],
            next_obs: self.next_obs[i].clone(),
            terminal,
            source,
        })
    }
}

/// Blue-team view of an episode against scripted reds: discrete actions in,
/// stacked observations and per-agent rewards out.
#[derive(Debug, Clone)]
pub struct TeamEnv {
    world: World,
    blues: Vec<EntityId>,
    reds: Vec<(EntityId, StreamRng)>,
    histories: Vec<FrameHistory>,
}

impl TeamEnv {
    /// Red UAV `id` draws its heading noise from `(seed, RedNoise, id)`,
    /// as the orchestrator does.
    pub fn new(scenario: Arc<EpisodeConfig>, seed: u64) -> Result<Self, ConfigError> {
        let world = World::new(scenario, seed)?;
        let blues: Vec<EntityId> = world.team_uavs(Team::Blue).map(|u| u.id).collect();
        let reds = world.team_uavs(Team::Red).map(|u| (u.id, stream_rng(seed, Stream::RedNoise, u.id.0 as u64))).collect();
        let mut env = Self { world, histories: vec![FrameHistory::default(); blues.len()], blues, reds };
        env.push_frames();
        Ok(env)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn blue_ids(&self) -> &[EntityId] {
        &self.blues
    }

    pub fn is_done(&self) -> bool {
        self.world.is_terminated()
    }

    /// Current stacked observation of every blue UAV.
    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.histories.iter().map(|h| h.stacked().expect("history is never empty").0).collect()
    }

    fn push_frames(&mut self) {
        let mode = self.world.config().blue.observability;
        for (id, h) in self.blues.iter().zip(&mut self.histories) {
            if let Ok(frame) = encode_frame(&self.world, *id, mode) {
                h.push(frame);
            }
        }
    }

    fn red_controls(&mut self) -> BTreeMap<EntityId, ControlInput> {
        let world = &self.world;
        let cfg = world.config();
        self.reds
            .iter_mut()
            .filter_map(|(id, rng)| {
                let u = world.uav(*id).filter(|u| u.is_active())?;
                match scripted_red_policy(&u.kin, &u.spec, &world.zone, cfg.agents.red_heading_noise, rng, cfg.dt) {
                    ActorOutput::Control(c) => Some((*id, c)),
                    ActorOutput::NoOp => None,
                }
            })
            .collect()
    }

    /// Steps with one discrete action per blue UAV, in id order.
    pub fn step(&mut self, actions: &[usize]) -> Result<EnvStep, LearnerError> {
        if actions.len() != self.blues.len() {
            return Err(LearnerError::ShapeMismatch { expected: self.blues.len(), got: actions.len() });
        }
        let mut controls = BTreeMap::new();
        for (id, &k) in self.blues.iter().zip(actions) {
            let spec = &self.world.uav(*id).expect("blue ids are stable").spec;
            let c = decode_action(k, spec).map_err(|e| LearnerError::Config(e.to_string()))?;
            controls.insert(*id, c);
        }
        self.step_controls(controls, actions.to_vec())
    }

    /// Steps with explicit blue controls; `actions` is what gets recorded.
    pub fn step_controls(
        &mut self,
        mut controls: BTreeMap<EntityId, ControlInput>,
        actions: Vec<usize>,
    ) -> Result<EnvStep, LearnerError> {
        let obs = self.observations();
        controls.extend(self.red_controls());
        let before = self.world.clone();
        let step = self.world.step(&controls).map_err(|e| LearnerError::Config(e.to_string()))?;
        self.push_frames();
        let reward_cfg = self.world.config().reward;
        let rewards = self.blues.iter().map(|id| compute_reward(&before, &self.world, *id, step.outcome, &reward_cfg)).collect();
        Ok(EnvStep { obs, actions, rewards, next_obs: self.observations(), events: step.events, outcome: step.outcome })
    }

    /// Plays the heuristic team policy to the end; returns the outcome.
    pub fn run_heuristic(mut self) -> Result<Outcome, LearnerError> {
        loop {
            let controls = heuristic_controls(&self.world);
            let n = self.blues.len();
            if let Some(o) = self.step_controls(controls, vec![0; n])?.outcome {
                return Ok(o);
            }
        }
    }
}
