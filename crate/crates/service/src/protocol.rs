//! Wire types. Every message carries the schema version in `wire`.

use hmt_core::agents::OperatorCommand;
use hmt_core::orchestrator::ActorBinding;
use hmt_core::sim::{
    EntityId, EntitySnapshot, EpisodeConfig, Event, FieldError, Outcome, Sensor, Team, UavStatus, Vec2, Zone,
};
use serde::{Deserialize, Serialize};

pub const WIRE_VERSION: &str = "hmt-wire/1";

fn wire() -> String {
    WIRE_VERSION.to_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Configured,
    Running,
    Paused,
    Finished,
}

/// `Step` advances a paused session by exactly one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlCommand {
    Start,
    Pause,
    Resume,
    Abort,
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pacing {
    pub steps_per_second: f64,
    /// Emit a tick every `decimation` steps. The final tick is always sent.
    pub decimation: u64,
}

impl Default for Pacing {
    fn default() -> Self {
        Self { steps_per_second: 10.0, decimation: 1 }
    }
}

/// Body of `POST /sessions`. Omitted fields fall back to the server's
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    #[serde(default)]
    pub config: Option<EpisodeConfig>,
    /// Defaults to `config.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub bindings: Option<Vec<ActorBinding>>,
    /// Policy id placed under the waypoint follower of every blue UAV when
    /// `bindings` is absent.
    #[serde(default)]
    pub policy: Option<String>,
    #[serde(default)]
    pub pacing: Option<Pacing>,
    /// Include ground-truth red positions in ticks.
    #[serde(default)]
    pub spectator: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavView {
    pub id: EntityId,
    pub team: Team,
    pub pos: Vec2,
    pub heading: f64,
    pub speed: f64,
    pub status: UavStatus,
    pub waypoints: Vec<Vec2>,
    pub sensors: Vec<Sensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedSensorView {
    pub id: EntityId,
    pub pos: Vec2,
    pub orientation: f64,
    pub sensor: Sensor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTick {
    pub t: u64,
    /// Index of the step that produced this state; absent for the initial
    /// state.
    pub step: Option<u64>,
    /// Ids of operator commands applied just before `step`.
    pub commands: Vec<u64>,
    pub status: SessionStatus,
    /// Blue UAVs.
    pub uavs: Vec<UavView>,
    /// Reds known to the blue team under its observability mode.
    pub perceived_reds: Vec<EntitySnapshot>,
    pub fixed_sensors: Vec<FixedSensorView>,
    pub zone: Zone,
    pub events: Vec<Event>,
    pub outcome: Option<Outcome>,
    #[serde(rename = "final")]
    pub is_final: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_reds: Option<Vec<EntitySnapshot>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ack {
    pub command_id: u64,
    /// Step index whose controls first see the command.
    pub applies_at: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Tick {
        tick: StateTick,
    },
    /// An accepted command, broadcast to every client of the session.
    Command {
        command_id: u64,
        applies_at: u64,
        command: OperatorCommand,
    },
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_ref: Option<String>,
        #[serde(flatten)]
        ack: Ack,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_ref: Option<String>,
        #[serde(flatten)]
        error: ErrorBody,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Command {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        client_ref: Option<String>,
        command: OperatorCommand,
    },
}

/// Adds the `wire` field to a message or response body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versioned<T> {
    #[serde(default = "wire")]
    pub wire: String,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Versioned<T> {
    pub fn new(body: T) -> Self {
        Self { wire: wire(), body }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub status: SessionStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub status: SessionStatus,
    pub t: u64,
    pub seed: u64,
    pub config: EpisodeConfig,
    pub bindings: Vec<ActorBinding>,
    pub pacing: Pacing,
    pub spectator: bool,
    pub outcome: Option<Outcome>,
    /// Datastore id of the saved record once finished.
    pub episode_id: Option<String>,
    pub clients: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRequest {
    pub command: ControlCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlResponse {
    pub status: SessionStatus,
    pub t: u64,
}
