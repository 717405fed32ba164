use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{
    ConfigError, EpisodeConfig, InitialHeading, ObservabilityMode, Payload, Sensor, SpawnRegion,
    Team, UavSpec, Zone,
};
use super::geom::{angle_diff, normalize_angle, Vec2};
use crate::rng::{stream_rng, Stream, StreamRng};

/// Identifier of a UAV or fixed sensor. UAVs are numbered first (blue, then
/// red), fixed sensors after them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Requested rates; clamped to the airframe limits when applied.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Speed change request, m/s².
    pub d_speed: f64,
    /// Heading change request, rad/s.
    pub d_heading: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { d_speed: 0.0, d_heading: 0.0 };

    pub fn new(d_speed: f64, d_heading: f64) -> Self {
        Self { d_speed, d_heading }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub pos: Vec2,
    /// Radians in `[0, 2π)`.
    pub heading: f64,
    pub speed: f64,
}

impl KinematicState {
    /// One explicit step of the planar flight model. Non-finite requests are
    /// treated as zero.
    pub fn integrate(&self, spec: &UavSpec, input: ControlInput, dt: f64) -> KinematicState {
        let finite_or_zero = |v: f64| if v.is_finite() { v } else { 0.0 };
        let accel = finite_or_zero(input.d_speed).clamp(-spec.max_accel, spec.max_accel);
        let turn = finite_or_zero(input.d_heading).clamp(-spec.max_turn_rate, spec.max_turn_rate);
        let speed = (self.speed + accel * dt).clamp(spec.min_speed, spec.max_speed);
        let heading = normalize_angle(self.heading + turn * dt);
        let pos = self.pos + Vec2::from_angle(heading) * (speed * dt);
        debug_assert!(pos.is_finite());
        KinematicState { pos, heading, speed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavStatus {
    Active,
    Neutralized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uav {
    pub id: EntityId,
    pub team: Team,
    pub spec: UavSpec,
    pub kin: KinematicState,
    pub sensors: Vec<Sensor>,
    pub payload: Payload,
    pub status: UavStatus,
}

impl Uav {
    pub fn is_active(&self) -> bool {
        self.status == UavStatus::Active
    }

    pub fn apply_control(&self, input: ControlInput, dt: f64) -> KinematicState {
        self.kin.integrate(&self.spec, input, dt)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSensor {
    pub id: EntityId,
    pub team: Team,
    pub pos: Vec2,
    pub orientation: f64,
    pub sensor: Sensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub observer: EntityId,
    pub target: EntityId,
    pub t: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    Detection { observer: EntityId, target: EntityId, t: u64 },
    Neutralization { by: EntityId, target: EntityId, t: u64 },
    Intrusion { target: EntityId, t: u64 },
    Timeout { t: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeReason {
    Neutralized,
    Intrusion,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub winner: Team,
    pub reason: OutcomeReason,
}

impl Outcome {
    pub fn blue_won(&self) -> bool {
        self.winner == Team::Blue
    }
}

/// What one entity knows about another at the current step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntitySnapshot {
    pub id: EntityId,
    pub team: Team,
    pub pos: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub status: UavStatus,
}

impl From<&Uav> for EntitySnapshot {
    fn from(u: &Uav) -> Self {
        Self { id: u.id, team: u.team, pos: u.kin.pos, heading: u.kin.heading, speed: u.kin.speed, status: u.status }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("episode already finished at t={t}")]
    Terminated { t: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub events: Vec<Event>,
    pub outcome: Option<Outcome>,
}

#[derive(Debug, Clone, PartialEq)]
struct WorldRng {
    spawn: StreamRng,
    sensing: StreamRng,
}

/// Complete state of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub t: u64,
    pub uavs: Vec<Uav>,
    pub fixed_sensors: Vec<FixedSensor>,
    pub zone: Zone,
    /// Detections of the most recent sensing pass.
    pub detections: Vec<Detection>,
    pub outcome: Option<Outcome>,
    rng: WorldRng,
    config: Arc<EpisodeConfig>,
}

impl World {
    /// Spawns every UAV uniformly in its team region and runs an initial
    /// sensing pass at `t = 0`.
    pub fn new(config: Arc<EpisodeConfig>, seed: u64) -> Result<World, ConfigError> {
        config.validate()?;
        let mut spawn = stream_rng(seed, Stream::Spawn, 0);
        let sensing = stream_rng(seed, Stream::Sensing, 0);

        let mut uavs: Vec<Uav> = Vec::with_capacity(config.blue_count + config.red_count);
        for team in [Team::Blue, Team::Red] {
            let tc = config.team(team);
            let count = config.count(team);
            let sep = config.spawn_separation;
            let footprint = count as f64 * std::f64::consts::PI * (0.5 * sep).powi(2);
            if sep > 0.0 && footprint > 0.5 * tc.spawn.area() {
                return Err(ConfigError::SpawnCapacity { team, count, separation: sep });
            }
            for _ in 0..count {
                let pos = place(&mut spawn, &tc.spawn, &uavs, sep)
                    .ok_or(ConfigError::SpawnCapacity { team, count, separation: sep })?;
                let heading = match tc.initial_heading {
                    InitialHeading::Random => normalize_angle(spawn.random::<f64>() * TAU),
                    InitialHeading::TowardZone => (config.zone.center - pos).angle(),
                };
                uavs.push(Uav {
                    id: EntityId(uavs.len() as u32),
                    team,
                    spec: tc.spec,
                    kin: KinematicState { pos, heading, speed: tc.initial_speed },
                    sensors: tc.sensors.clone(),
                    payload: tc.payload,
                    status: UavStatus::Active,
                });
            }
        }
        let first_fixed = uavs.len() as u32;
        let fixed_sensors = config
            .fixed_sensors
            .iter()
            .enumerate()
            .map(|(i, fs)| FixedSensor {
                id: EntityId(first_fixed + i as u32),
                team: fs.team,
                pos: fs.pos,
                orientation: fs.orientation,
                sensor: fs.sensor,
            })
            .collect();

        let mut world = World {
            t: 0,
            uavs,
            fixed_sensors,
            zone: config.zone,
            detections: Vec::new(),
            outcome: None,
            rng: WorldRng { spawn, sensing },
            config,
        };
        world.detections = world.sensing_pass();
        Ok(world)
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn config_arc(&self) -> &Arc<EpisodeConfig> {
        &self.config
    }

    pub fn uav(&self, id: EntityId) -> Option<&Uav> {
        self.uavs.get(id.0 as usize).filter(|u| u.id == id)
    }

    pub fn team_uavs(&self, team: Team) -> impl Iterator<Item = &Uav> {
        self.uavs.iter().filter(move |u| u.team == team)
    }

    pub fn is_terminated(&self) -> bool {
        self.outcome.is_some()
    }

    /// Runs every sensor of `observer` against the opposing team's active
    /// UAVs, drawing from the sensing stream. Inactive UAV observers and
    /// unknown ids yield nothing.
    ///
    /// One uniform draw is consumed per (sensor, target) pair that passes
    /// the range and sector test, iterating sensors in declaration order and
    /// targets in ascending id order.
    pub fn sense(&mut self, observer: EntityId) -> Vec<Detection> {
        let Some(view) = self.observer_view(observer) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for target in self.uavs.iter().filter(|u| u.team == view.team.opponent() && u.is_active()) {
            let mut detected = false;
            for sensor in &view.sensors {
                if in_coverage(view.pos, view.heading, sensor, target.kin.pos) {
                    let u: f64 = self.rng.sensing.random();
                    detected |= u < sensor.p_detect;
                }
            }
            if detected {
                out.push(Detection { observer, target: target.id, t: self.t });
            }
        }
        out
    }

    fn observer_view(&self, id: EntityId) -> Option<ObserverView> {
        if let Some(u) = self.uav(id) {
            return u.is_active().then(|| ObserverView {
                team: u.team,
                pos: u.kin.pos,
                heading: u.kin.heading,
                sensors: u.sensors.clone(),
            });
        }
        self.fixed_sensors.iter().find(|f| f.id == id).map(|f| ObserverView {
            team: f.team,
            pos: f.pos,
            heading: f.orientation,
            sensors: vec![f.sensor],
        })
    }

    /// All observers in ascending id order.
    fn sensing_pass(&mut self) -> Vec<Detection> {
        let ids: Vec<EntityId> = self
            .uavs
            .iter()
            .map(|u| u.id)
            .chain(self.fixed_sensors.iter().map(|f| f.id))
            .collect();
        ids.into_iter().flat_map(|id| self.sense(id)).collect()
    }

    fn observer_team(&self, id: EntityId) -> Option<Team> {
        self.uav(id)
            .map(|u| u.team)
            .or_else(|| self.fixed_sensors.iter().find(|f| f.id == id).map(|f| f.team))
    }

    /// The entities `uav` knows about under `mode`: its own team always,
    /// plus active opponents according to the observability mode, in id
    /// order.
    pub fn perceived_entities(&self, uav: EntityId, mode: ObservabilityMode) -> Vec<EntitySnapshot> {
        let Some(me) = self.uav(uav) else {
            return Vec::new();
        };
        let visible = |target: EntityId| match mode {
            ObservabilityMode::FullAwareness => true,
            ObservabilityMode::TeamShared => self
                .detections
                .iter()
                .any(|d| d.target == target && self.observer_team(d.observer) == Some(me.team)),
            ObservabilityMode::OwnSensorsOnly => {
                self.detections.iter().any(|d| d.target == target && d.observer == uav)
            }
        };
        self.uavs
            .iter()
            .filter(|u| u.team == me.team || (u.is_active() && visible(u.id)))
            .map(EntitySnapshot::from)
            .collect()
    }

    /// Advances one step: kinematics for all active UAVs from the pre-step
    /// state, then sensing, EMP neutralization, intrusion and termination,
    /// in that order.
    pub fn step(&mut self, controls: &BTreeMap<EntityId, ControlInput>) -> Result<StepOutcome, StepError> {
        if self.outcome.is_some() {
            return Err(StepError::Terminated { t: self.t });
        }
        let dt = self.config.dt;
        let next: Vec<Option<KinematicState>> = self
            .uavs
            .iter()
            .map(|u| {
                u.is_active()
                    .then(|| u.apply_control(controls.get(&u.id).copied().unwrap_or_default(), dt))
            })
            .collect();
        for (u, kin) in self.uavs.iter_mut().zip(next) {
            if let Some(kin) = kin {
                u.kin = kin;
            }
        }
        self.t += 1;
        let t = self.t;

        self.detections = self.sensing_pass();
        let mut events: Vec<Event> = self
            .detections
            .iter()
            .map(|d| Event::Detection { observer: d.observer, target: d.target, t })
            .collect();

        let red_ids: Vec<EntityId> =
            self.uavs.iter().filter(|u| u.team == Team::Red && u.is_active()).map(|u| u.id).collect();
        for red in red_ids {
            let red_pos = self.uavs[red.0 as usize].kin.pos;
            let hit = self
                .uavs
                .iter()
                .filter(|b| b.team == Team::Blue && b.is_active())
                .filter_map(|b| match b.payload {
                    Payload::Emp { radius } => {
                        let d = b.kin.pos.distance(red_pos);
                        (d <= radius).then_some((d, b.id))
                    }
                    Payload::None => None,
                })
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if let Some((_, by)) = hit {
                self.uavs[red.0 as usize].status = UavStatus::Neutralized;
                events.push(Event::Neutralization { by, target: red, t });
            }
        }

        let zone = self.zone;
        let intruders: Vec<EntityId> = self
            .uavs
            .iter()
            .filter(|u| u.team == Team::Red && u.is_active() && u.kin.pos.distance(zone.center) <= zone.radius)
            .map(|u| u.id)
            .collect();
        events.extend(intruders.iter().map(|&target| Event::Intrusion { target, t }));

        let outcome = if self.team_uavs(Team::Red).all(|u| !u.is_active()) {
            Some(Outcome { winner: Team::Blue, reason: OutcomeReason::Neutralized })
        } else if !intruders.is_empty() {
            Some(Outcome { winner: Team::Red, reason: OutcomeReason::Intrusion })
        } else if t >= self.config.max_steps {
            events.push(Event::Timeout { t });
            Some(Outcome { winner: Team::Blue, reason: OutcomeReason::Timeout })
        } else {
            None
        };
        self.outcome = outcome;
        Ok(StepOutcome { events, outcome })
    }
}

struct ObserverView {
    team: Team,
    pos: Vec2,
    heading: f64,
    sensors: Vec<Sensor>,
}

/// Range and angular-sector test.
pub fn in_coverage(origin: Vec2, heading: f64, sensor: &Sensor, target: Vec2) -> bool {
    let rel = target - origin;
    if rel.norm() > sensor.range {
        return false;
    }
    if sensor.fov_width >= TAU {
        return true;
    }
    let center = heading + sensor.fov_offset;
    angle_diff(rel.angle(), normalize_angle(center)).abs() <= 0.5 * sensor.fov_width
}

fn sample_region(rng: &mut StreamRng, region: &SpawnRegion) -> Vec2 {
    match *region {
        SpawnRegion::Rect { min, max } => {
            Vec2::new(rng.random_range(min.x..max.x), rng.random_range(min.y..max.y))
        }
        SpawnRegion::Ring { center, r_min, r_max } => {
            let r = rng.random_range(r_min * r_min..r_max * r_max).sqrt();
            let a = rng.random::<f64>() * TAU;
            center + Vec2::from_angle(a) * r
        }
    }
}

const SPAWN_ATTEMPTS: usize = 1000;

fn place(rng: &mut StreamRng, region: &SpawnRegion, placed: &[Uav], sep: f64) -> Option<Vec2> {
    (0..SPAWN_ATTEMPTS)
        .map(|_| sample_region(rng, region))
        .find(|p| placed.iter().all(|u| u.kin.pos.distance(*p) >= sep))
}
