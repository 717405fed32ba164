use serde::{Deserialize, Serialize};

use crate::sim::{EntityId, Outcome, OutcomeReason, Team, World};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub r_win: f64,
    pub r_lose: f64,
    /// Reward per unit of normalized distance closed toward the nearest red.
    pub shaping_k: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { r_win: 1.0, r_lose: -1.0, shaping_k: 0.01 }
    }
}

/// Nearest active red to `agent` as `(id, normalized distance)`; ties go to
/// the lower id.
pub fn nearest_red(world: &World, agent: EntityId) -> Option<(EntityId, f64)> {
    let me = world.uav(agent)?;
    let scale = world.config().map.half_extent();
    world
        .team_uavs(Team::Red)
        .filter(|r| r.is_active())
        .map(|r| (r.id, me.kin.pos.distance(r.kin.pos) / scale))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
}

/// Shaping on the distance to the red that was nearest before the step
/// (true positions), plus the team terminal term.
///
/// The red's post-step position is used even if it was neutralized during
/// the step, so shaping telescopes over an episode with one red.
pub fn compute_reward(
    before: &World,
    after: &World,
    agent: EntityId,
    outcome: Option<Outcome>,
    cfg: &RewardConfig,
) -> f64 {
    let shaping = match (nearest_red(before, agent), after.uav(agent)) {
        (Some((red, d0)), Some(me)) => {
            let scale = after.config().map.half_extent();
            let red_after = after.uav(red).expect("red ids are stable").kin.pos;
            let d1 = me.kin.pos.distance(red_after) / scale;
            cfg.shaping_k * (d0 - d1)
        }
        _ => 0.0,
    };
    let terminal = match outcome.map(|o| o.reason) {
        Some(OutcomeReason::Neutralized) => cfg.r_win,
        Some(OutcomeReason::Intrusion) => cfg.r_lose,
        Some(OutcomeReason::Timeout) | None => 0.0,
    };
    shaping + terminal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{EpisodeConfig, KinematicState, Vec2};
    use std::sync::Arc;

    fn pair(closing: f64) -> (World, World) {
        let cfg = EpisodeConfig { blue_count: 1, ..Default::default() };
        let mut w = World::new(Arc::new(cfg), 2).unwrap();
        w.uavs[0].kin = KinematicState { pos: Vec2::new(500.0, 500.0), heading: 0.0, speed: 0.0 };
        w.uavs[1].kin.pos = Vec2::new(800.0, 500.0);
        let mut after = w.clone();
        after.uavs[0].kin.pos.x += closing;
        (w, after)
    }

    #[test]
    fn shaping_arithmetic() {
        let (a, b) = pair(10.0);
        let r = compute_reward(&a, &b, EntityId(0), None, &RewardConfig::default());
        assert!((r - 1e-4).abs() < 1e-15, "{r}");
    }

    #[test]
    fn terminal_terms() {
        let cfg = RewardConfig::default();
        let (a, b) = pair(0.0);
        let win = Outcome { winner: Team::Blue, reason: OutcomeReason::Neutralized };
        assert_eq!(compute_reward(&a, &b, EntityId(0), Some(win), &cfg), 1.0);
        let (a, b) = pair(-20.0);
        let loss = Outcome { winner: Team::Red, reason: OutcomeReason::Intrusion };
        let r = compute_reward(&a, &b, EntityId(0), Some(loss), &cfg);
        assert!((r - (-1.0 - 2e-4)).abs() < 1e-15);
        let timeout = Outcome { winner: Team::Blue, reason: OutcomeReason::Timeout };
        assert_eq!(compute_reward(&a, &a, EntityId(0), Some(timeout), &cfg), 0.0);
    }
}
