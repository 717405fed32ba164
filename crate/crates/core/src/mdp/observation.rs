use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::MdpError;
use crate::sim::{EntityId, ObservabilityMode, Team, Vec2, World};

/// Recorded in every episode header; bump when the slot table changes.
pub const OBSERVATION_LAYOUT_VERSION: &str = "obs-v1";

/// Frames per stacked observation.
pub const HISTORY_LEN: usize = 3;

/// Relative-position entries are clamped to `±OBS_CLAMP`.
pub const OBS_CLAMP: f64 = 1.5;

/// Slot table of one frame, for an agent on a team of `blue_count`:
///
/// | slots                | content                                     |
/// |----------------------|---------------------------------------------|
/// | `2·(blue_count − 1)` | teammates' relative `(x, y)`, id order       |
/// | `2·red_count`        | reds' relative `(x, y)`, zero if not seen    |
/// | 2                    | zone center relative `(x, y)`               |
/// | 3                    | own `cos(heading)`, `sin(heading)`, speed / max_speed |
///
/// Positions are divided by the map half-extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationLayout {
    pub blue_count: usize,
    pub red_count: usize,
}

impl ObservationLayout {
    pub fn new(blue_count: usize, red_count: usize) -> Self {
        Self { blue_count, red_count }
    }

    pub fn frame_len(&self) -> usize {
        2 * (self.blue_count - 1) + 2 * self.red_count + 2 + 3
    }

    pub fn stacked_len(&self) -> usize {
        HISTORY_LEN * self.frame_len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationFrame(pub Vec<f64>);

/// `HISTORY_LEN` frames concatenated, oldest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StackedObservation(pub Vec<f64>);

impl StackedObservation {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn encode_frame(world: &World, agent: EntityId, mode: ObservabilityMode) -> Result<ObservationFrame, MdpError> {
    let me = world
        .uav(agent)
        .filter(|u| u.team == Team::Blue && u.is_active())
        .ok_or(MdpError::NotActiveBlue(agent))?;
    let cfg = world.config();
    let scale = cfg.map.half_extent();
    let layout = ObservationLayout::new(cfg.blue_count, cfg.red_count);
    let perceived = world.perceived_entities(agent, mode);

    let mut out = Vec::with_capacity(layout.frame_len());
    let mut push_rel = |p: Vec2| {
        let rel = (p - me.kin.pos) * (1.0 / scale);
        out.push(rel.x.clamp(-OBS_CLAMP, OBS_CLAMP));
        out.push(rel.y.clamp(-OBS_CLAMP, OBS_CLAMP));
    };
    for mate in world.team_uavs(Team::Blue).filter(|u| u.id != agent) {
        push_rel(mate.kin.pos);
    }
    for red in world.team_uavs(Team::Red) {
        match perceived.iter().find(|s| s.id == red.id) {
            Some(s) => push_rel(s.pos),
            None => push_rel(me.kin.pos),
        }
    }
    push_rel(world.zone.center);
    out.push(me.kin.heading.cos());
    out.push(me.kin.heading.sin());
    out.push(me.kin.speed / me.spec.max_speed);
    debug_assert_eq!(out.len(), layout.frame_len());
    assert!(out.iter().all(|v| v.is_finite()), "non-finite observation for {agent}");
    Ok(ObservationFrame(out))
}

/// Last `HISTORY_LEN` frames; a short history is back-filled by repeating
/// its earliest frame.
pub fn stack(history: &[ObservationFrame]) -> Result<StackedObservation, MdpError> {
    let first = history.first().ok_or(MdpError::EmptyHistory)?;
    let tail = &history[history.len().saturating_sub(HISTORY_LEN)..];
    let pad = HISTORY_LEN - tail.len();
    let mut out = Vec::with_capacity(HISTORY_LEN * first.0.len());
    for _ in 0..pad {
        out.extend_from_slice(&first.0);
    }
    for f in tail {
        out.extend_from_slice(&f.0);
    }
    Ok(StackedObservation(out))
}

/// Rolling window of the most recent frames for one agent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameHistory {
    frames: VecDeque<ObservationFrame>,
}

impl FrameHistory {
    pub fn push(&mut self, frame: ObservationFrame) {
        if self.frames.len() == HISTORY_LEN {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn latest(&self) -> Option<&ObservationFrame> {
        self.frames.back()
    }

    pub fn stacked(&self) -> Result<StackedObservation, MdpError> {
        let (a, b) = self.frames.as_slices();
        if b.is_empty() {
            stack(a)
        } else {
            stack(&self.frames.iter().cloned().collect::<Vec<_>>())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{EpisodeConfig, KinematicState, Sensor};
    use std::sync::Arc;

    fn f(v: f64) -> ObservationFrame {
        ObservationFrame(vec![v, v])
    }

    #[test]
    fn stack_backfills_and_truncates() {
        assert_eq!(stack(&[f(0.0)]).unwrap().0, [0.0; 6]);
        assert_eq!(stack(&[f(0.0), f(1.0)]).unwrap().0, [0.0, 0.0, 0.0, 0.0, 1.0, 1.0]);
        let ten: Vec<_> = (0..10).map(|i| f(i as f64)).collect();
        assert_eq!(stack(&ten).unwrap().0, [7.0, 7.0, 8.0, 8.0, 9.0, 9.0]);
        assert_eq!(stack(&[]), Err(MdpError::EmptyHistory));
    }

    #[test]
    fn history_matches_stack() {
        let mut h = FrameHistory::default();
        let mut all = Vec::new();
        for i in 0..6 {
            h.push(f(i as f64));
            all.push(f(i as f64));
            assert_eq!(h.stacked().unwrap(), stack(&all).unwrap());
        }
    }

    fn world() -> World {
        let mut cfg = EpisodeConfig { blue_count: 2, fixed_sensors: vec![], ..Default::default() };
        cfg.blue.sensors = vec![Sensor::omni(400.0, 1.0)];
        World::new(Arc::new(cfg), 11).unwrap()
    }

    #[test]
    fn slot_layout() {
        let mut w = world();
        let center = w.zone.center;
        w.uavs[0].kin = KinematicState { pos: center, heading: 0.0, speed: 15.0 };
        w.uavs[1].kin.pos = center + Vec2::new(100.0, 0.0);
        let frame = encode_frame(&w, EntityId(0), ObservabilityMode::OwnSensorsOnly).unwrap();
        assert_eq!(frame.0.len(), ObservationLayout::new(2, 1).frame_len());
        assert_eq!(frame.0.len(), 9);
        assert!((frame.0[0] - 0.1).abs() < 1e-12 && frame.0[1] == 0.0);
        // red far away and not sensed → zero slot
        assert_eq!(&frame.0[2..4], &[0.0, 0.0]);
        // agent at zone center
        assert_eq!(&frame.0[4..6], &[0.0, 0.0]);
        assert_eq!(&frame.0[6..9], &[1.0, 0.0, 0.5]);

        let full = encode_frame(&w, EntityId(0), ObservabilityMode::FullAwareness).unwrap();
        assert_ne!(&full.0[2..4], &[0.0, 0.0]);
    }

    #[test]
    fn red_agent_is_rejected() {
        let w = world();
        assert_eq!(
            encode_frame(&w, EntityId(2), ObservabilityMode::FullAwareness),
            Err(MdpError::NotActiveBlue(EntityId(2)))
        );
    }
}
