use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::geom::Vec2;
use crate::mdp::RewardConfig;

/// Flight envelope of one UAV type. Fixed-wing airframes use `min_speed > 0`,
/// VTOL airframes `min_speed = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UavSpec {
    pub max_speed: f64,
    pub min_speed: f64,
    pub max_turn_rate: f64,
    pub max_accel: f64,
}

/// Sector sensor. `fov_offset` is the sector center relative to the carrier
/// heading (or the fixed orientation for ground sensors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub range: f64,
    pub fov_offset: f64,
    pub fov_width: f64,
    pub p_detect: f64,
}

impl Sensor {
    pub fn omni(range: f64, p_detect: f64) -> Self {
        Self { range, fov_offset: 0.0, fov_width: TAU, p_detect }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    None,
    Emp { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub center: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Team {
    Blue,
    Red,
}

impl Team {
    pub fn opponent(self) -> Team {
        match self {
            Team::Blue => Team::Red,
            Team::Red => Team::Blue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservabilityMode {
    FullAwareness,
    TeamShared,
    OwnSensorsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpawnRegion {
    Rect { min: Vec2, max: Vec2 },
    Ring { center: Vec2, r_min: f64, r_max: f64 },
}

impl SpawnRegion {
    pub fn area(&self) -> f64 {
        match *self {
            SpawnRegion::Rect { min, max } => (max.x - min.x) * (max.y - min.y),
            SpawnRegion::Ring { r_min, r_max, .. } => {
                std::f64::consts::PI * (r_max * r_max - r_min * r_min)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialHeading {
    /// Uniform on `[0, 2π)`, drawn from the spawn stream.
    Random,
    TowardZone,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeamConfig {
    pub spawn: SpawnRegion,
    pub spec: UavSpec,
    pub sensors: Vec<Sensor>,
    pub payload: Payload,
    pub observability: ObservabilityMode,
    pub initial_speed: f64,
    pub initial_heading: InitialHeading,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSensorConfig {
    pub team: Team,
    pub pos: Vec2,
    /// Orientation the sensor's `fov_offset` is measured from.
    pub orientation: f64,
    pub sensor: Sensor,
}

/// Map rectangle `[0, width] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapBounds {
    pub width: f64,
    pub height: f64,
}

impl MapBounds {
    /// Normalization scale for observations.
    pub fn half_extent(&self) -> f64 {
        0.5 * self.width.max(self.height)
    }
}

/// Parameters of the built-in actors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub arrival_tolerance: f64,
    /// Standard deviation of the scripted red's per-step heading noise (rad).
    pub red_heading_noise: f64,
    pub patrol_radius: f64,
    pub patrol_speed: f64,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            arrival_tolerance: 30.0,
            red_heading_noise: 0.05,
            patrol_radius: 300.0,
            patrol_speed: 15.0,
        }
    }
}

/// Everything needed to instantiate an episode. Distances in meters, angles
/// in radians, times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub map: MapBounds,
    pub blue_count: usize,
    pub red_count: usize,
    pub zone: Zone,
    pub blue: TeamConfig,
    pub red: TeamConfig,
    pub fixed_sensors: Vec<FixedSensorConfig>,
    pub dt: f64,
    pub max_steps: u64,
    /// Minimum distance between two UAVs at spawn.
    pub spawn_separation: f64,
    pub reward: RewardConfig,
    pub agents: AgentParams,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    /// Five blue VTOL defenders and one red intruder on a 2 km square map.
    fn default() -> Self {
        let zone = Zone { center: Vec2::new(400.0, 1000.0), radius: 200.0 };
        Self {
            map: MapBounds { width: 2000.0, height: 2000.0 },
            blue_count: 5,
            red_count: 1,
            zone,
            blue: TeamConfig {
                spawn: SpawnRegion::Ring { center: zone.center, r_min: 250.0, r_max: 400.0 },
                spec: UavSpec { max_speed: 30.0, min_speed: 0.0, max_turn_rate: 0.5, max_accel: 0.25 },
                sensors: vec![Sensor::omni(400.0, 1.0)],
                payload: Payload::Emp { radius: 50.0 },
                observability: ObservabilityMode::TeamShared,
                initial_speed: 0.0,
                initial_heading: InitialHeading::Random,
            },
            red: TeamConfig {
                spawn: SpawnRegion::Rect {
                    min: Vec2::new(1850.0, 100.0),
                    max: Vec2::new(1950.0, 1900.0),
                },
                spec: UavSpec { max_speed: 25.0, min_speed: 0.0, max_turn_rate: 0.5, max_accel: 0.25 },
                sensors: Vec::new(),
                payload: Payload::None,
                observability: ObservabilityMode::FullAwareness,
                initial_speed: 25.0,
                initial_heading: InitialHeading::TowardZone,
            },
            fixed_sensors: vec![FixedSensorConfig {
                team: Team::Blue,
                pos: zone.center,
                orientation: 0.0,
                sensor: Sensor::omni(600.0, 0.8),
            }],
            dt: 1.0,
            max_steps: 300,
            spawn_separation: 10.0,
            reward: RewardConfig::default(),
            agents: AgentParams { patrol_radius: 400.0, patrol_speed: 10.0, ..AgentParams::default() },
            seed: 0,
        }
    }
}

impl EpisodeConfig {
    /// Two blue vs one red on a 1 km map with a 150-step horizon; the
    /// small learning benchmark. Airframes are agile and sensing is short
    /// range, so interception depends on positioning before detection.
    pub fn reduced() -> Self {
        let zone = Zone { center: Vec2::new(200.0, 500.0), radius: 100.0 };
        let mut cfg = Self {
            map: MapBounds { width: 1000.0, height: 1000.0 },
            blue_count: 2,
            zone,
            max_steps: 150,
            ..Self::default()
        };
        cfg.blue.spawn = SpawnRegion::Ring { center: zone.center, r_min: 120.0, r_max: 200.0 };
        cfg.red.spawn = SpawnRegion::Rect {
            min: Vec2::new(900.0, 100.0),
            max: Vec2::new(950.0, 900.0),
        };
        cfg.fixed_sensors = vec![FixedSensorConfig {
            team: Team::Blue,
            pos: zone.center,
            orientation: 0.0,
            sensor: Sensor::omni(200.0, 0.8),
        }];
        cfg.blue.spec.max_accel = 5.0;
        cfg.red.spec.max_accel = 5.0;
        cfg.blue.sensors = vec![Sensor::omni(100.0, 1.0)];
        cfg.agents = AgentParams { patrol_radius: 160.0, patrol_speed: 15.0, ..AgentParams::default() };
        cfg
    }

    pub fn team(&self, team: Team) -> &TeamConfig {
        match team {
            Team::Blue => &self.blue,
            Team::Red => &self.red,
        }
    }

    pub fn count(&self, team: Team) -> usize {
        match team {
            Team::Blue => self.blue_count,
            Team::Red => self.red_count,
        }
    }

    /// Checks every field; reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v = Validator::default();
        v.check("map.width", self.map.width.is_finite() && self.map.width > 0.0, "must be > 0");
        v.check("map.height", self.map.height.is_finite() && self.map.height > 0.0, "must be > 0");
        v.check("blue_count", self.blue_count >= 1, "must be >= 1");
        v.check("red_count", self.red_count >= 1, "must be >= 1");
        v.check("zone.center", self.zone.center.is_finite(), "must be finite");
        v.check("zone.radius", self.zone.radius.is_finite() && self.zone.radius > 0.0, "must be > 0");
        v.check("dt", self.dt.is_finite() && self.dt > 0.0, "must be > 0");
        v.check("max_steps", self.max_steps > 0, "must be > 0");
        v.check(
            "spawn_separation",
            self.spawn_separation.is_finite() && self.spawn_separation >= 0.0,
            "must be >= 0",
        );
        for (name, team) in [("blue", &self.blue), ("red", &self.red)] {
            validate_team(&mut v, name, team);
        }
        for (i, fs) in self.fixed_sensors.iter().enumerate() {
            v.check(&format!("fixed_sensors[{i}].pos"), fs.pos.is_finite(), "must be finite");
            v.check(
                &format!("fixed_sensors[{i}].orientation"),
                fs.orientation.is_finite(),
                "must be finite",
            );
            validate_sensor(&mut v, &format!("fixed_sensors[{i}].sensor"), &fs.sensor);
        }
        let r = &self.reward;
        v.check(
            "reward",
            r.r_win.is_finite() && r.r_lose.is_finite() && r.shaping_k.is_finite(),
            "values must be finite",
        );
        let a = &self.agents;
        v.check(
            "agents.arrival_tolerance",
            a.arrival_tolerance.is_finite() && a.arrival_tolerance > 0.0,
            "must be > 0",
        );
        v.check(
            "agents.red_heading_noise",
            a.red_heading_noise.is_finite() && a.red_heading_noise >= 0.0,
            "must be >= 0",
        );
        v.check(
            "agents.patrol_radius",
            a.patrol_radius.is_finite() && a.patrol_radius > 0.0,
            "must be > 0",
        );
        v.check(
            "agents.patrol_speed",
            a.patrol_speed.is_finite() && a.patrol_speed >= 0.0,
            "must be >= 0",
        );
        v.finish()
    }
}

fn validate_team(v: &mut Validator, name: &str, team: &TeamConfig) {
    let s = &team.spec;
    v.check(&format!("{name}.spec.max_speed"), s.max_speed.is_finite() && s.max_speed > 0.0, "must be > 0");
    v.check(
        &format!("{name}.spec.min_speed"),
        s.min_speed.is_finite() && s.min_speed >= 0.0 && s.min_speed <= s.max_speed,
        "must lie in [0, max_speed]",
    );
    v.check(
        &format!("{name}.spec.max_turn_rate"),
        s.max_turn_rate.is_finite() && s.max_turn_rate > 0.0,
        "must be > 0",
    );
    v.check(&format!("{name}.spec.max_accel"), s.max_accel.is_finite() && s.max_accel > 0.0, "must be > 0");
    v.check(
        &format!("{name}.initial_speed"),
        team.initial_speed.is_finite()
            && team.initial_speed >= s.min_speed
            && team.initial_speed <= s.max_speed,
        "must lie in [min_speed, max_speed]",
    );
    for (i, sensor) in team.sensors.iter().enumerate() {
        validate_sensor(v, &format!("{name}.sensors[{i}]"), sensor);
    }
    if let Payload::Emp { radius } = team.payload {
        v.check(&format!("{name}.payload.radius"), radius.is_finite() && radius > 0.0, "must be > 0");
    }
    match team.spawn {
        SpawnRegion::Rect { min, max } => v.check(
            &format!("{name}.spawn"),
            min.is_finite() && max.is_finite() && min.x < max.x && min.y < max.y,
            "rect needs min < max on both axes",
        ),
        SpawnRegion::Ring { center, r_min, r_max } => v.check(
            &format!("{name}.spawn"),
            center.is_finite() && r_min.is_finite() && r_max.is_finite() && 0.0 <= r_min && r_min < r_max,
            "ring needs 0 <= r_min < r_max",
        ),
    }
}

fn validate_sensor(v: &mut Validator, path: &str, s: &Sensor) {
    v.check(&format!("{path}.range"), s.range.is_finite() && s.range > 0.0, "must be > 0");
    v.check(&format!("{path}.fov_offset"), s.fov_offset.is_finite(), "must be finite");
    v.check(
        &format!("{path}.fov_width"),
        s.fov_width.is_finite() && s.fov_width > 0.0 && s.fov_width <= TAU,
        "must lie in (0, 2π]",
    );
    v.check(
        &format!("{path}.p_detect"),
        s.p_detect.is_finite() && s.p_detect > 0.0 && s.p_detect <= 1.0,
        "must lie in (0, 1]",
    );
}

#[derive(Default)]
struct Validator {
    errors: Vec<FieldError>,
}

impl Validator {
    fn check(&mut self, field: &str, ok: bool, reason: &str) {
        if !ok {
            self.errors.push(FieldError { field: field.to_owned(), reason: reason.to_owned() });
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(self.errors))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}` {}", self.field, self.reason)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid episode config: {}", join(.0))]
    Invalid(Vec<FieldError>),
    #[error("cannot place {count} {team:?} UAVs {separation} m apart in the spawn region")]
    SpawnCapacity { team: Team, count: usize, separation: f64 },
}

impl ConfigError {
    pub fn field_errors(&self) -> Vec<FieldError> {
        match self {
            ConfigError::Invalid(errors) => errors.clone(),
            ConfigError::SpawnCapacity { team, .. } => vec![FieldError {
                field: match team {
                    Team::Blue => "blue.spawn".into(),
                    Team::Red => "red.spawn".into(),
                },
                reason: self.to_string(),
            }],
        }
    }
}

fn join(errors: &[FieldError]) -> String {
    errors.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
