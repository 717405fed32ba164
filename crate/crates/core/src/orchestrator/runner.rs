use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use super::record::{
    ActorBinding, EpisodeFooter, EpisodeHeader, EpisodeRecord, PauseSpan, StepRecord, UavStep, EPISODE_FORMAT,
};
use super::OrchestratorError;
use crate::agents::{
    apply_operator_command, names, Actor, ActorContext, CommandError, ControlStack, HeuristicBlue, OperatorCommand,
    ScriptedRed, WaypointActor, WaypointQueue,
};
use crate::learner::{DuelingQNet, PolicyActor};
use crate::mdp::{compute_reward, encode_frame, ObservationFrame, OBSERVATION_LAYOUT_VERSION};
use crate::rng::{stream_rng, Stream};
use crate::sim::{EntityId, EntitySnapshot, EpisodeConfig, Team, Uav, World};

/// Trained networks addressable by `policy:<id>` bindings.
pub type PolicyRegistry = BTreeMap<String, Arc<DuelingQNet>>;

/// Waypoint follower above the heuristic for blue, scripted attacker for red.
pub fn default_bindings(world: &World) -> Vec<ActorBinding> {
    world
        .uavs
        .iter()
        .map(|u| ActorBinding {
            uav_id: u.id,
            actors: match u.team {
                Team::Blue => vec![names::WAYPOINT.into(), names::HEURISTIC_BLUE.into()],
                Team::Red => vec![names::SCRIPTED_RED.into()],
            },
        })
        .collect()
}

/// Bindings that put `policy:<id>` under the waypoint follower for every blue.
pub fn policy_bindings(world: &World, policy_id: &str) -> Vec<ActorBinding> {
    let mut b = default_bindings(world);
    for binding in &mut b {
        if world.uav(binding.uav_id).is_some_and(|u| u.team == Team::Blue) {
            binding.actors[1] = format!("{}{policy_id}", names::POLICY_PREFIX);
        }
    }
    b
}

fn digest_hex(net: &DuelingQNet) -> String {
    format!("{:016x}", net.digest())
}

fn build_actor(
    name: &str,
    uav: &Uav,
    seed: u64,
    policies: &PolicyRegistry,
) -> Result<Box<dyn Actor>, OrchestratorError> {
    let wrong_team = || OrchestratorError::Binding(format!("actor {name:?} cannot drive {:?} UAV {}", uav.team, uav.id));
    match name {
        names::WAYPOINT => Ok(Box::new(WaypointActor)),
        names::HEURISTIC_BLUE if uav.team == Team::Blue => Ok(Box::new(HeuristicBlue)),
        names::SCRIPTED_RED if uav.team == Team::Red => {
            Ok(Box::new(ScriptedRed::new(stream_rng(seed, Stream::RedNoise, uav.id.0 as u64))))
        }
        names::HEURISTIC_BLUE | names::SCRIPTED_RED => Err(wrong_team()),
        _ => match name.strip_prefix(names::POLICY_PREFIX) {
            Some(_) if uav.team != Team::Blue => Err(wrong_team()),
            Some(id) => {
                let net = policies
                    .get(id)
                    .ok_or_else(|| OrchestratorError::Binding(format!("unknown policy {id:?} in binding {name:?}")))?;
                Ok(Box::new(PolicyActor::new(name, net.clone())))
            }
            None => Err(OrchestratorError::Binding(format!("unknown actor {name:?}"))),
        },
    }
}

/// Steps one episode, dispatching every UAV's control stack and recording
/// each step. Operator commands submitted between steps apply to the next
/// one.
pub struct EpisodeRunner {
    world: World,
    stacks: Vec<ControlStack>,
    queues: BTreeMap<EntityId, WaypointQueue>,
    header: EpisodeHeader,
    steps: Vec<StepRecord>,
    pending: Vec<OperatorCommand>,
    pauses: Vec<PauseSpan>,
    started: Instant,
}

impl EpisodeRunner {
    /// Fails before step 0 if any active UAV lacks a binding or a binding
    /// names an unknown actor.
    pub fn new(
        scenario: Arc<EpisodeConfig>,
        seed: u64,
        bindings: Vec<ActorBinding>,
        policies: &PolicyRegistry,
    ) -> Result<Self, OrchestratorError> {
        let world = World::new(scenario, seed)?;
        let mut by_id: BTreeMap<EntityId, &ActorBinding> = BTreeMap::new();
        for b in &bindings {
            if world.uav(b.uav_id).is_none() {
                return Err(OrchestratorError::Binding(format!("binding for unknown UAV {}", b.uav_id)));
            }
            if by_id.insert(b.uav_id, b).is_some() {
                return Err(OrchestratorError::Binding(format!("UAV {} is bound twice", b.uav_id)));
            }
        }
        let mut stacks = Vec::with_capacity(world.uavs.len());
        let mut used = BTreeMap::new();
        for u in &world.uavs {
            let b = by_id.get(&u.id).ok_or_else(|| OrchestratorError::Binding(format!("UAV {} has no binding", u.id)))?;
            let actors =
                b.actors.iter().map(|name| build_actor(name, u, seed, policies)).collect::<Result<Vec<_>, _>>()?;
            for name in &b.actors {
                if let Some(id) = name.strip_prefix(names::POLICY_PREFIX) {
                    used.insert(id.to_owned(), digest_hex(&policies[id]));
                }
            }
            stacks.push(ControlStack::new(u.id, actors));
        }
        let tolerance = world.config().agents.arrival_tolerance;
        let queues = world.team_uavs(Team::Blue).map(|u| (u.id, WaypointQueue::new(tolerance))).collect();
        let header = EpisodeHeader {
            format: EPISODE_FORMAT.into(),
            software_version: crate::SOFTWARE_VERSION.into(),
            observation_layout: OBSERVATION_LAYOUT_VERSION.into(),
            seed,
            config: world.config().clone(),
            bindings,
            policies: used,
            initial: world.uavs.iter().map(EntitySnapshot::from).collect(),
        };
        Ok(Self {
            world,
            stacks,
            queues,
            header,
            steps: Vec::new(),
            pending: Vec::new(),
            pauses: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn header(&self) -> &EpisodeHeader {
        &self.header
    }

    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn queues(&self) -> &BTreeMap<EntityId, WaypointQueue> {
        &self.queues
    }

    pub fn is_done(&self) -> bool {
        self.world.is_terminated()
    }

    /// Applies a blue-team operator command now. Returns the step index
    /// whose controls it first affects.
    pub fn submit(&mut self, cmd: OperatorCommand) -> Result<u64, CommandError> {
        apply_operator_command(&self.world, &mut self.queues, &cmd, Team::Blue)?;
        self.pending.push(cmd);
        Ok(self.world.t)
    }

    pub fn record_pause(&mut self, duration: Duration) {
        self.pauses.push(PauseSpan { at_t: self.world.t, duration_ms: duration.as_millis() as u64 });
    }

    /// Evaluates every stack, advances the world and records the step.
    pub fn step(&mut self) -> Result<&StepRecord, OrchestratorError> {
        let t = self.world.t;
        let cfg = self.world.config_arc().clone();
        let mut controls = BTreeMap::new();
        let mut partial = Vec::new();
        let mut dummy = WaypointQueue::new(cfg.agents.arrival_tolerance);
        let mut rank = [0usize; 2];
        for (u, stack) in self.world.uavs.iter().zip(&mut self.stacks) {
            let team_slot = (u.team == Team::Red) as usize;
            let team_index = rank[team_slot];
            rank[team_slot] += 1;
            if !u.is_active() {
                continue;
            }
            let mode = cfg.team(u.team).observability;
            let frame = (u.team == Team::Blue).then(|| encode_frame(&self.world, u.id, mode).ok()).flatten();
            let perceived = self.world.perceived_entities(u.id, mode);
            let queue = self.queues.get_mut(&u.id).unwrap_or(&mut dummy);
            let mut ctx = ActorContext { world: &self.world, uav: u.id, perceived: &perceived, waypoints: queue, team_index };
            let res = stack.evaluate(&mut ctx);
            controls.insert(u.id, res.control);
            let controller = res.source.map(|i| stack.actors[i].kind().to_owned());
            partial.push((u.id, res.control, controller, res.action, frame));
        }
        let before = self.world.clone();
        let out = self.world.step(&controls)?;
        let uavs = partial
            .into_iter()
            .map(|(id, control, controller, action, frame)| {
                let after = self.world.uav(id).expect("ids are stable");
                let reward = (after.team == Team::Blue)
                    .then(|| compute_reward(&before, &self.world, id, out.outcome, &cfg.reward));
                UavStep { id, control, controller, action, frame, reward, kin: after.kin, status: after.status }
            })
            .collect();
        self.steps.push(StepRecord { t, commands: std::mem::take(&mut self.pending), uavs, events: out.events });
        Ok(self.steps.last().expect("just pushed"))
    }

    /// Completes the record. Fails if the episode has not terminated.
    pub fn finish(self) -> Result<EpisodeRecord, OrchestratorError> {
        let Some(outcome) = self.world.outcome else {
            return Err(OrchestratorError::Usage(format!("episode still running at t={}", self.world.t)));
        };
        let mode = self.world.config().blue.observability;
        let final_frames = self
            .world
            .team_uavs(Team::Blue)
            .filter_map(|u| encode_frame(&self.world, u.id, mode).ok().map(|f| (u.id, f)))
            .collect::<BTreeMap<EntityId, ObservationFrame>>();
        let footer = EpisodeFooter {
            outcome,
            steps: self.steps.len() as u64,
            final_frames,
            wall_time_ms: self.started.elapsed().as_millis() as u64,
            pauses: self.pauses,
        };
        Ok(EpisodeRecord { header: self.header, steps: self.steps, footer })
    }

    /// Header and steps so far, for quarantine of an aborted episode.
    pub fn into_partial(self) -> (EpisodeHeader, Vec<StepRecord>) {
        (self.header, self.steps)
    }
}

/// Runs a headless episode to completion.
pub fn run_episode(
    scenario: Arc<EpisodeConfig>,
    seed: u64,
    bindings: Vec<ActorBinding>,
    policies: &PolicyRegistry,
) -> Result<EpisodeRecord, OrchestratorError> {
    let mut runner = EpisodeRunner::new(scenario, seed, bindings, policies)?;
    while !runner.is_done() {
        runner.step()?;
    }
    runner.finish()
}
