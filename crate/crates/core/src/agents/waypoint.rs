use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::sim::Vec2;

/// Ordered waypoints for one UAV. The head is consumed once the UAV is
/// within `arrival_tolerance` of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointQueue {
    pub points: VecDeque<Vec2>,
    pub arrival_tolerance: f64,
}

impl WaypointQueue {
    pub fn new(arrival_tolerance: f64) -> Self {
        Self { points: VecDeque::new(), arrival_tolerance }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn head(&self) -> Option<Vec2> {
        self.points.front().copied()
    }

    /// Drops every leading waypoint already reached from `pos`.
    pub fn consume_reached(&mut self, pos: Vec2) {
        while self.head().is_some_and(|h| h.distance(pos) <= self.arrival_tolerance) {
            self.points.pop_front();
        }
    }
}
