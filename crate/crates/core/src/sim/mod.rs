//! Seeded, discrete-time 2D airspace simulation: two UAV teams, sensors,
//! EMP payloads and a restricted zone.

mod config;
mod geom;
mod world;

pub use config::{
    AgentParams, ConfigError, EpisodeConfig, FieldError, FixedSensorConfig, InitialHeading, MapBounds,
    ObservabilityMode, Payload, Sensor, SpawnRegion, Team, TeamConfig, UavSpec, Zone,
};
pub use geom::{angle_diff, normalize_angle, Vec2};
pub use world::{
    in_coverage, ControlInput, Detection, EntityId, EntitySnapshot, Event, FixedSensor, KinematicState,
    Outcome, OutcomeReason, StepError, StepOutcome, Uav, UavStatus, World,
};
