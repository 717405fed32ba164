use crate::sim::{ControlInput, EntityId, EntitySnapshot, World};

use super::WaypointQueue;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActorOutput {
    Control(ControlInput),
    /// The actor yields to lower-priority actors.
    NoOp,
}

/// Read access to the world for one UAV's decision, plus its waypoint queue.
pub struct ActorContext<'a> {
    pub world: &'a World,
    pub uav: EntityId,
    /// Entities visible to this UAV under its team's observability mode.
    pub perceived: &'a [EntitySnapshot],
    pub waypoints: &'a mut WaypointQueue,
    /// Rank of the UAV among its team, by id.
    pub team_index: usize,
}

pub trait Actor: Send {
    /// Binding identifier this actor was created from.
    fn kind(&self) -> &str;

    fn act(&mut self, ctx: &mut ActorContext<'_>) -> ActorOutput;

    /// Discrete action behind the most recent output, for policy actors.
    fn last_action(&self) -> Option<usize> {
        None
    }
}

/// First non-yielding output wins; all-yield is zero input.
pub fn resolve_control(outputs: &[ActorOutput]) -> ControlInput {
    resolve_index(outputs)
        .map(|i| match outputs[i] {
            ActorOutput::Control(c) => c,
            ActorOutput::NoOp => unreachable!(),
        })
        .unwrap_or(ControlInput::ZERO)
}

/// Position of the winning output, if any.
pub fn resolve_index(outputs: &[ActorOutput]) -> Option<usize> {
    outputs.iter().position(|o| matches!(o, ActorOutput::Control(_)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub control: ControlInput,
    /// Index in the stack of the actor whose output was applied.
    pub source: Option<usize>,
    pub action: Option<usize>,
}

/// Priority-ordered actors bound to one UAV; index 0 has the highest
/// priority.
pub struct ControlStack {
    pub uav_id: EntityId,
    pub actors: Vec<Box<dyn Actor>>,
}

impl ControlStack {
    pub fn new(uav_id: EntityId, actors: Vec<Box<dyn Actor>>) -> Self {
        Self { uav_id, actors }
    }

    pub fn kinds(&self) -> Vec<String> {
        self.actors.iter().map(|a| a.kind().to_owned()).collect()
    }

    /// Every actor is evaluated, even when overridden, so stateful actors
    /// keep their history and random streams aligned.
    pub fn evaluate(&mut self, ctx: &mut ActorContext<'_>) -> Resolution {
        let outputs: Vec<ActorOutput> = self.actors.iter_mut().map(|a| a.act(ctx)).collect();
        let source = resolve_index(&outputs);
        Resolution {
            control: resolve_control(&outputs),
            source,
            action: source.and_then(|i| self.actors[i].last_action()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn override_rules() {
        let a = ControlInput::new(1.0, 0.1);
        let b = ControlInput::new(-1.0, 0.2);
        assert_eq!(resolve_control(&[ActorOutput::NoOp, ActorOutput::Control(a)]), a);
        assert_eq!(resolve_control(&[ActorOutput::Control(a), ActorOutput::Control(b)]), a);
        assert_eq!(resolve_control(&[ActorOutput::NoOp, ActorOutput::NoOp]), ControlInput::ZERO);
        assert_eq!(resolve_control(&[]), ControlInput::ZERO);
    }

    fn output() -> impl Strategy<Value = ActorOutput> {
        prop_oneof![
            Just(ActorOutput::NoOp),
            (-10.0..10.0f64, -1.0..1.0f64).prop_map(|(s, h)| ActorOutput::Control(ControlInput::new(s, h))),
        ]
    }

    proptest! {
        #[test]
        fn first_control_dominates(outputs in prop::collection::vec(output(), 0..8)) {
            let resolved = resolve_control(&outputs);
            match outputs.iter().find_map(|o| match o { ActorOutput::Control(c) => Some(*c), _ => None }) {
                Some(c) => prop_assert_eq!(resolved, c),
                None => prop_assert_eq!(resolved, ControlInput::ZERO),
            }
        }
    }
}
