use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::agents::OperatorCommand;
use crate::mdp::ObservationFrame;
use crate::sim::{ControlInput, EntityId, EntitySnapshot, EpisodeConfig, Event, KinematicState, Outcome, UavStatus};

/// Version tag of the episode file format.
pub const EPISODE_FORMAT: &str = "hmt-episode/1";

/// Priority-ordered actor identifiers bound to one UAV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActorBinding {
    pub uav_id: EntityId,
    pub actors: Vec<String>,
}

/// Headless episodes free-run; interactive ones are paced and accept
/// operator commands. Both produce the same record for the same inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeMode {
    Headless,
    Interactive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeHeader {
    pub format: String,
    pub software_version: String,
    pub observation_layout: String,
    pub seed: u64,
    pub config: EpisodeConfig,
    pub bindings: Vec<ActorBinding>,
    /// Parameter digest (hex) of every policy referenced by a binding.
    pub policies: BTreeMap<String, String>,
    pub initial: Vec<EntitySnapshot>,
}

/// What happened to one active UAV during a step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavStep {
    pub id: EntityId,
    /// Resolved control that was applied.
    pub control: ControlInput,
    /// Binding identifier of the actor whose output won, if any.
    pub controller: Option<String>,
    /// Discrete action, when the winning actor is a policy.
    pub action: Option<usize>,
    /// Pre-step observation frame (blue UAVs only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<ObservationFrame>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    /// Post-step state.
    pub kin: KinematicState,
    pub status: UavStatus,
}

/// One simulation step from `t` to `t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: u64,
    /// Operator commands applied just before this step.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub commands: Vec<OperatorCommand>,
    pub uavs: Vec<UavStep>,
    pub events: Vec<Event>,
}

/// Wall-clock interval during which an interactive episode was paused.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PauseSpan {
    /// Step index at which the pause began.
    pub at_t: u64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFooter {
    pub outcome: Outcome,
    pub steps: u64,
    /// Observation frames after the last step, keyed by blue UAV.
    pub final_frames: BTreeMap<EntityId, ObservationFrame>,
    pub wall_time_ms: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pauses: Vec<PauseSpan>,
}

impl EpisodeFooter {
    /// The footer without wall-clock metadata, for replay comparison.
    pub fn without_timing(&self) -> EpisodeFooter {
        EpisodeFooter { wall_time_ms: 0, pauses: Vec::new(), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub header: EpisodeHeader,
    pub steps: Vec<StepRecord>,
    pub footer: EpisodeFooter,
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum LineRef<'a> {
    Header(&'a EpisodeHeader),
    Step(&'a StepRecord),
    Footer(&'a EpisodeFooter),
}

fn line(v: LineRef<'_>) -> String {
    serde_json::to_string(&v).expect("records serialize")
}

impl EpisodeRecord {
    pub fn outcome(&self) -> Outcome {
        self.footer.outcome
    }

    pub fn blue_won(&self) -> bool {
        self.footer.outcome.blue_won()
    }

    /// Newline-delimited JSON: a header line, one line per step, a footer line.
    pub fn to_ndjson(&self) -> String {
        let mut out = line(LineRef::Header(&self.header));
        out.push('\n');
        for s in &self.steps {
            out.push_str(&line(LineRef::Step(s)));
            out.push('\n');
        }
        out.push_str(&line(LineRef::Footer(&self.footer)));
        out.push('\n');
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, OrchestratorError> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut footer = None;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let bad = |e: serde_json::Error| OrchestratorError::Format(format!("line {}: {e}", i + 1));
            // Tagged-enum deserialization would buffer the line and lose
            // integer map keys, so dispatch on the tag by hand.
            let mut value: serde_json::Value = serde_json::from_str(raw).map_err(bad)?;
            let kind = value.as_object_mut().and_then(|o| o.remove("kind"));
            match kind.as_ref().and_then(|k| k.as_str()) {
                Some("header") if header.is_none() && steps.is_empty() => header = Some(serde_json::from_value(value).map_err(bad)?),
                Some("step") if header.is_some() && footer.is_none() => steps.push(serde_json::from_value(value).map_err(bad)?),
                Some("footer") if header.is_some() && footer.is_none() => footer = Some(serde_json::from_value(value).map_err(bad)?),
                Some("header" | "step" | "footer") => return Err(OrchestratorError::Format(format!("line {}: out of order", i + 1))),
                _ => return Err(OrchestratorError::Format(format!("line {}: missing or unknown kind", i + 1))),
            }
        }
        let header = header.ok_or_else(|| OrchestratorError::Format("missing header".into()))?;
        let footer = footer.ok_or_else(|| OrchestratorError::Format("missing footer (partial episode?)".into()))?;
        Ok(Self { header, steps, footer })
    }

    /// Position of every UAV at `t = 0, 1, …, steps`, keyed by id.
    pub fn tracks(&self) -> BTreeMap<EntityId, Vec<crate::sim::Vec2>> {
        let mut tracks: BTreeMap<EntityId, Vec<crate::sim::Vec2>> =
            self.header.initial.iter().map(|s| (s.id, vec![s.pos])).collect();
        for step in &self.steps {
            for track in tracks.values_mut() {
                let last = *track.last().expect("seeded with the initial position");
                track.push(last);
            }
            for u in &step.uavs {
                if let Some(track) = tracks.get_mut(&u.id) {
                    *track.last_mut().expect("just pushed") = u.kin.pos;
                }
            }
        }
        tracks
    }
}
