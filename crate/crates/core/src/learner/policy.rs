use std::sync::Arc;

use super::dqn::greedy_action;
use super::net::DuelingQNet;
use crate::agents::{Actor, ActorContext, ActorOutput};
use crate::mdp::{decode_action, encode_frame, FrameHistory};

/// Greedy trained policy bound to one blue UAV. Keeps its own frame
/// history, so it must be evaluated every step to stay aligned.
#[derive(Debug, Clone)]
pub struct PolicyActor {
    kind: String,
    net: Arc<DuelingQNet>,
    history: FrameHistory,
    last_action: Option<usize>,
}

impl PolicyActor {
    /// `kind` is the binding identifier, e.g. `policy:run1-ep3000`.
    pub fn new(kind: impl Into<String>, net: Arc<DuelingQNet>) -> Self {
        Self { kind: kind.into(), net, history: FrameHistory::default(), last_action: None }
    }
}

impl Actor for PolicyActor {
    fn kind(&self) -> &str {
        &self.kind
    }

    fn act(&mut self, ctx: &mut ActorContext<'_>) -> ActorOutput {
        let world = ctx.world;
        let Some(uav) = world.uav(ctx.uav) else { return ActorOutput::NoOp };
        let Ok(frame) = encode_frame(world, ctx.uav, world.config().blue.observability) else {
            self.last_action = None;
            return ActorOutput::NoOp;
        };
        self.history.push(frame);
        let obs = self.history.stacked().expect("just pushed");
        let Ok(q) = self.net.q_values(obs.as_slice()) else {
            self.last_action = None;
            return ActorOutput::NoOp;
        };
        let k = greedy_action(&q);
        self.last_action = Some(k);
        ActorOutput::Control(decode_action(k, &uav.spec).expect("greedy index is a valid action"))
    }

    fn last_action(&self) -> Option<usize> {
        self.last_action
    }
}
