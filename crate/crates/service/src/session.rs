//! Session state machine, independent of transport and timing.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use hmt_core::agents::{CommandError, OperatorCommand};
use hmt_core::orchestrator::{
    default_bindings, policy_bindings, ActorBinding, EpisodeRecord, EpisodeRunner, OrchestratorError, PolicyRegistry,
};
use hmt_core::sim::{EntityId, EntitySnapshot, EpisodeConfig, FieldError, Team, World};

use crate::protocol::{
    Ack, ControlCommand, FixedSensorView, Pacing, SessionInfo, SessionRequest, SessionStatus, StateTick, UavView,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("no session {0:?}")]
    NotFound(String),
    #[error("no episode {0:?}")]
    EpisodeNotFound(String),
    #[error("cannot {action:?} a session that is {status:?}")]
    State { action: String, status: SessionStatus },
    #[error("invalid request")]
    Invalid(Vec<FieldError>),
    #[error(transparent)]
    Command(#[from] CommandError),
    #[error("{0}")]
    Orchestrator(#[from] OrchestratorError),
    #[error("datastore unavailable")]
    NoStore,
}

impl SessionError {
    fn state(action: impl std::fmt::Debug, status: SessionStatus) -> Self {
        SessionError::State { action: format!("{action:?}").to_lowercase(), status }
    }
}

/// Fully resolved session parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSpec {
    pub config: Arc<EpisodeConfig>,
    pub seed: u64,
    pub bindings: Vec<ActorBinding>,
    pub pacing: Pacing,
    pub spectator: bool,
}

impl SessionSpec {
    /// Fills omitted request fields and validates everything that can be
    /// checked before an episode exists.
    pub fn resolve(req: SessionRequest, defaults: &EpisodeConfig, pacing: Pacing) -> Result<Self, SessionError> {
        let config = Arc::new(req.config.unwrap_or_else(|| defaults.clone()));
        let mut fields = Vec::new();
        let pacing = req.pacing.unwrap_or(pacing);
        if !(pacing.steps_per_second.is_finite() && pacing.steps_per_second > 0.0) {
            fields.push(FieldError { field: "pacing.steps_per_second".into(), reason: "must be positive".into() });
        }
        if pacing.decimation == 0 {
            fields.push(FieldError { field: "pacing.decimation".into(), reason: "must be at least 1".into() });
        }
        if req.bindings.is_some() && req.policy.is_some() {
            fields.push(FieldError { field: "policy".into(), reason: "give either bindings or policy".into() });
        }
        let seed = req.seed.unwrap_or(config.seed);
        let world = match World::new(config.clone(), seed) {
            Ok(w) => Some(w),
            Err(e) => {
                fields.extend(e.field_errors().into_iter().map(|f| FieldError { field: format!("config.{}", f.field), ..f }));
                None
            }
        };
        if !fields.is_empty() {
            return Err(SessionError::Invalid(fields));
        }
        let world = world.expect("no errors");
        let bindings = match (req.bindings, req.policy) {
            (Some(b), _) => b,
            (None, Some(p)) => policy_bindings(&world, &p),
            (None, None) => default_bindings(&world),
        };
        Ok(Self { config, seed, bindings, pacing, spectator: req.spectator })
    }
}

/// Everything produced by one transition, in emission order.
#[derive(Debug, Default)]
pub struct Emitted {
    pub ticks: Vec<StateTick>,
    /// Set when the episode has just ended and should be persisted.
    pub finished: Option<EpisodeEnd>,
    pub aborted: bool,
}

#[derive(Debug)]
pub enum EpisodeEnd {
    Complete(Box<EpisodeRecord>),
    Aborted(Box<(hmt_core::orchestrator::EpisodeHeader, Vec<hmt_core::orchestrator::StepRecord>)>),
}

/// One interactive episode. Commands are applied to the runner as they
/// arrive and take effect on the next step.
pub struct Session {
    id: String,
    spec: SessionSpec,
    runner: Option<EpisodeRunner>,
    status: SessionStatus,
    next_command: u64,
    pending: Vec<u64>,
    paused_at: Option<Instant>,
    latest: Option<StateTick>,
    outcome: Option<hmt_core::sim::Outcome>,
    t: u64,
    pub episode_id: Option<String>,
}

impl Session {
    /// Builds the runner immediately so binding errors surface at creation.
    pub fn new(id: String, spec: SessionSpec, policies: &PolicyRegistry) -> Result<Self, SessionError> {
        let runner = EpisodeRunner::new(spec.config.clone(), spec.seed, spec.bindings.clone(), policies).map_err(
            |e| match e {
                OrchestratorError::Binding(reason) => SessionError::Invalid(vec![FieldError { field: "bindings".into(), reason }]),
                other => SessionError::Orchestrator(other),
            },
        )?;
        Ok(Self {
            id,
            spec,
            runner: Some(runner),
            status: SessionStatus::Configured,
            next_command: 0,
            pending: Vec::new(),
            paused_at: None,
            latest: None,
            outcome: None,
            t: 0,
            episode_id: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn spec(&self) -> &SessionSpec {
        &self.spec
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    /// Most recent tick sent, for clients that (re)connect mid-episode.
    pub fn latest_tick(&self) -> Option<&StateTick> {
        self.latest.as_ref()
    }

    pub fn info(&self, clients: usize) -> SessionInfo {
        SessionInfo {
            session_id: self.id.clone(),
            status: self.status,
            t: self.t,
            seed: self.spec.seed,
            config: (*self.spec.config).clone(),
            bindings: self.spec.bindings.clone(),
            pacing: self.spec.pacing,
            spectator: self.spec.spectator,
            outcome: self.outcome,
            episode_id: self.episode_id.clone(),
            clients,
        }
    }

    pub fn control(&mut self, cmd: ControlCommand) -> Result<Emitted, SessionError> {
        use ControlCommand::*;
        use SessionStatus::*;
        let mut out = Emitted::default();
        match (cmd, self.status) {
            (Start, Configured) => {
                self.status = Running;
                let tick = self.snapshot(None, Vec::new(), Vec::new());
                self.emit(tick, &mut out);
            }
            (Pause, Running) => {
                self.status = Paused;
                self.paused_at = Some(Instant::now());
            }
            (Resume, Paused) => {
                self.status = Running;
                if let (Some(since), Some(r)) = (self.paused_at.take(), self.runner.as_mut()) {
                    r.record_pause(since.elapsed());
                }
            }
            (Step, Paused) => return self.advance_inner(true),
            (Abort, Finished) => return Err(SessionError::state(cmd, self.status)),
            (Abort, _) => {
                self.status = Finished;
                let runner = self.runner.take().expect("runner lives until finished");
                if !runner.steps().is_empty() {
                    out.finished = Some(EpisodeEnd::Aborted(Box::new(runner.into_partial())));
                }
                out.aborted = true;
            }
            _ => return Err(SessionError::state(cmd, self.status)),
        }
        Ok(out)
    }

    /// One paced step. Does nothing unless running.
    pub fn advance(&mut self) -> Result<Emitted, SessionError> {
        if self.status != SessionStatus::Running {
            return Ok(Emitted::default());
        }
        self.advance_inner(false)
    }

    pub fn submit(&mut self, cmd: OperatorCommand) -> Result<Ack, SessionError> {
        if !matches!(self.status, SessionStatus::Running | SessionStatus::Paused) {
            return Err(SessionError::state("command", self.status));
        }
        let runner = self.runner.as_mut().expect("running sessions have a runner");
        let applies_at = runner.submit(cmd)?;
        let command_id = self.next_command;
        self.next_command += 1;
        self.pending.push(command_id);
        Ok(Ack { command_id, applies_at })
    }

    fn advance_inner(&mut self, forced: bool) -> Result<Emitted, SessionError> {
        let mut out = Emitted::default();
        let runner = self.runner.as_mut().expect("running sessions have a runner");
        let step = runner.step()?;
        let (t, events) = (step.t, step.events.clone());
        self.t = t + 1;
        let commands = std::mem::take(&mut self.pending);
        if runner.is_done() {
            let runner = self.runner.take().expect("checked above");
            self.outcome = runner.world().outcome;
            self.status = SessionStatus::Finished;
            let mut tick = self.tick_from(&runner, Some(t), commands, events);
            tick.is_final = true;
            out.finished = Some(EpisodeEnd::Complete(Box::new(runner.finish()?)));
            self.emit(tick, &mut out);
        } else if forced || self.t.is_multiple_of(self.spec.pacing.decimation) {
            let tick = self.snapshot(Some(t), commands, events);
            self.emit(tick, &mut out);
        }
        Ok(out)
    }

    fn emit(&mut self, tick: StateTick, out: &mut Emitted) {
        self.latest = Some(tick.clone());
        out.ticks.push(tick);
    }

    fn snapshot(&self, step: Option<u64>, commands: Vec<u64>, events: Vec<hmt_core::sim::Event>) -> StateTick {
        self.tick_from(self.runner.as_ref().expect("live session"), step, commands, events)
    }

    fn tick_from(
        &self,
        runner: &EpisodeRunner,
        step: Option<u64>,
        commands: Vec<u64>,
        events: Vec<hmt_core::sim::Event>,
    ) -> StateTick {
        let queues = runner.queues().iter().map(|(id, q)| (*id, q.points.iter().copied().collect())).collect();
        tick_from_world(runner.world(), &queues, self.spec.spectator, step, commands, events, self.status)
    }
}

fn tick_from_world(
    world: &World,
    waypoints: &BTreeMap<EntityId, Vec<hmt_core::sim::Vec2>>,
    spectator: bool,
    step: Option<u64>,
    commands: Vec<u64>,
    events: Vec<hmt_core::sim::Event>,
    status: SessionStatus,
) -> StateTick {
    let mode = world.config().blue.observability;
    let uavs = world
        .team_uavs(Team::Blue)
        .map(|u| UavView {
            id: u.id,
            team: u.team,
            pos: u.kin.pos,
            heading: u.kin.heading,
            speed: u.kin.speed,
            status: u.status,
            waypoints: waypoints.get(&u.id).cloned().unwrap_or_default(),
            sensors: u.sensors.clone(),
        })
        .collect();
    let mut perceived: BTreeMap<EntityId, EntitySnapshot> = BTreeMap::new();
    for b in world.team_uavs(Team::Blue).filter(|u| u.is_active()) {
        for e in world.perceived_entities(b.id, mode).into_iter().filter(|e| e.team == Team::Red) {
            perceived.insert(e.id, e);
        }
    }
    let fixed_sensors = world
        .fixed_sensors
        .iter()
        .filter(|f| f.team == Team::Blue)
        .map(|f| FixedSensorView { id: f.id, pos: f.pos, orientation: f.orientation, sensor: f.sensor })
        .collect();
    StateTick {
        t: world.t,
        step,
        commands,
        status,
        uavs,
        perceived_reds: perceived.into_values().collect(),
        fixed_sensors,
        zone: world.zone,
        events,
        outcome: world.outcome,
        is_final: false,
        true_reds: spectator.then(|| world.team_uavs(Team::Red).map(EntitySnapshot::from).collect()),
    }
}
