//! Human-machine teaming experimentation core: a seeded UAV airspace
//! simulation, priority-ordered control stacks for human takeover, a
//! dueling double DQN learner with demonstration mixing, and the episode
//! orchestration, recording and replay machinery around them.

pub mod agents;
pub mod learner;
pub mod mdp;
pub mod orchestrator;
pub mod plot;
pub mod rng;
pub mod sim;

/// Software version written into episode headers.
pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");
