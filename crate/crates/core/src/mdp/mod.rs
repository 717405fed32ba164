//! Markov decision process used to train the blue team: stacked relative
//! position observations, a 3×3 discrete action grid and a shaped reward.

mod action;
mod observation;
mod reward;

pub use action::{action_components, decode_action, encode_action, quantize_control, NUM_ACTIONS, NOOP_ACTION};
pub use observation::{
    encode_frame, stack, FrameHistory, ObservationFrame, ObservationLayout, StackedObservation, HISTORY_LEN,
    OBSERVATION_LAYOUT_VERSION, OBS_CLAMP,
};
pub use reward::{compute_reward, nearest_red, RewardConfig};

use crate::sim::EntityId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MdpError {
    #[error("action index {0} out of range 0..9")]
    ActionOutOfRange(usize),
    #[error("cannot stack an empty observation history")]
    EmptyHistory,
    #[error("entity {0} is not an active blue UAV")]
    NotActiveBlue(EntityId),
}
