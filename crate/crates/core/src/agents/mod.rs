//! Actors that drive UAVs and the priority stacks that combine them.
//!
//! Every UAV is bound to a [`ControlStack`]. Each step all actors in the
//! stack are evaluated; the first one that does not yield wins. Placing a
//! waypoint follower above an autonomous policy gives the operator a
//! takeover that ends as soon as the waypoint queue drains.

mod command;
mod policies;
mod stack;
mod waypoint;

pub use command::{apply_operator_command, CommandError, OperatorCommand};
pub use policies::{
    heuristic_blue_policy, scripted_red_policy, steer_toward, waypoint_policy, HeuristicBlue, ScriptedRed,
    WaypointActor,
};
pub use stack::{resolve_control, resolve_index, Actor, ActorContext, ActorOutput, ControlStack, Resolution};
pub use waypoint::WaypointQueue;

/// Stable binding identifiers.
pub mod names {
    pub const WAYPOINT: &str = "waypoint";
    pub const HEURISTIC_BLUE: &str = "heuristic_blue";
    pub const SCRIPTED_RED: &str = "scripted_red";
    /// Prefix of trained-policy bindings, followed by a checkpoint id.
    pub const POLICY_PREFIX: &str = "policy:";
}
