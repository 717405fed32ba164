use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::WaypointQueue;
use crate::sim::{EntityId, Team, Vec2, World};

/// Waypoint edits an operator can issue for UAVs of their own team.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorCommand {
    AddWaypoint { uav_id: EntityId, pos: Vec2 },
    RemoveWaypoint { uav_id: EntityId, index: usize },
    ClearWaypoints { uav_id: EntityId },
}

impl OperatorCommand {
    pub fn uav_id(&self) -> EntityId {
        match *self {
            OperatorCommand::AddWaypoint { uav_id, .. }
            | OperatorCommand::RemoveWaypoint { uav_id, .. }
            | OperatorCommand::ClearWaypoints { uav_id } => uav_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandError {
    #[error("unknown UAV {uav_id}")]
    UnknownUav { uav_id: EntityId },
    #[error("UAV {uav_id} belongs to the {team:?} team; operators may only command their own team")]
    Unauthorized { uav_id: EntityId, team: Team },
    #[error("waypoint index {index} out of bounds for UAV {uav_id} (queue length {len})")]
    IndexOutOfBounds { uav_id: EntityId, index: usize, len: usize },
    #[error("non-finite waypoint position")]
    InvalidPosition,
}

/// Applies `cmd` on behalf of an operator of `operator_team`. Rejected
/// commands leave every queue unchanged.
pub fn apply_operator_command(
    world: &World,
    queues: &mut BTreeMap<EntityId, WaypointQueue>,
    cmd: &OperatorCommand,
    operator_team: Team,
) -> Result<(), CommandError> {
    let uav_id = cmd.uav_id();
    let uav = world.uav(uav_id).ok_or(CommandError::UnknownUav { uav_id })?;
    if uav.team != operator_team {
        return Err(CommandError::Unauthorized { uav_id, team: uav.team });
    }
    let tolerance = world.config().agents.arrival_tolerance;
    let queue = queues.entry(uav_id).or_insert_with(|| WaypointQueue::new(tolerance));
    match *cmd {
        OperatorCommand::AddWaypoint { pos, .. } => {
            if !pos.is_finite() {
                return Err(CommandError::InvalidPosition);
            }
            queue.points.push_back(pos);
        }
        OperatorCommand::RemoveWaypoint { index, .. } => {
            if index >= queue.len() {
                return Err(CommandError::IndexOutOfBounds { uav_id, index, len: queue.len() });
            }
            queue.points.remove(index);
        }
        OperatorCommand::ClearWaypoints { .. } => queue.points.clear(),
    }
    Ok(())
}
