use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use rand_distr::StandardNormal;

use super::names;
use super::stack::{Actor, ActorContext, ActorOutput};
use super::WaypointQueue;
use crate::rng::StreamRng;
use crate::sim::{angle_diff, ControlInput, EntitySnapshot, KinematicState, Team, UavSpec, Vec2, Zone};

/// Proportional steering toward `target`: the heading error is cancelled as
/// fast as the turn-rate limit allows, and speed tracks `desired_speed`
/// while the target is within ±90° of the nose, otherwise the UAV brakes.
pub fn steer_toward(kin: &KinematicState, spec: &UavSpec, target: Vec2, desired_speed: f64, dt: f64) -> ControlInput {
    let err = angle_diff((target - kin.pos).angle(), kin.heading);
    let d_heading = (err / dt).clamp(-spec.max_turn_rate, spec.max_turn_rate);
    let d_speed = if err.abs() < FRAC_PI_2 {
        ((desired_speed - kin.speed) / dt).clamp(-spec.max_accel, spec.max_accel)
    } else {
        -spec.max_accel
    };
    ControlInput { d_speed, d_heading }
}

/// Path following: consumes reached waypoints, then steers at full speed
/// toward the head. Yields when the queue is empty.
pub fn waypoint_policy(kin: &KinematicState, spec: &UavSpec, queue: &mut WaypointQueue, dt: f64) -> ActorOutput {
    queue.consume_reached(kin.pos);
    match queue.head() {
        Some(head) => ActorOutput::Control(steer_toward(kin, spec, head, spec.max_speed, dt)),
        None => ActorOutput::NoOp,
    }
}

/// Distance to a patrol slot beyond which the defender sprints to it.
const PATROL_CATCH_UP: f64 = 100.0;
/// Angle the steering carrot leads the patrol slot by.
const PATROL_LEAD: f64 = 0.35;

/// Pure pursuit of the nearest perceived red; without contact, an orbit
/// around the zone center with the team spread over evenly spaced slots.
#[allow(clippy::too_many_arguments)]
pub fn heuristic_blue_policy(
    perceived: &[EntitySnapshot],
    kin: &KinematicState,
    spec: &UavSpec,
    zone: &Zone,
    team_index: usize,
    team_size: usize,
    patrol_radius: f64,
    patrol_speed: f64,
    t: u64,
    dt: f64,
) -> ActorOutput {
    let nearest = perceived
        .iter()
        .filter(|s| s.team == Team::Red && s.status == crate::sim::UavStatus::Active)
        .min_by(|a, b| {
            kin.pos.distance(a.pos).total_cmp(&kin.pos.distance(b.pos)).then(a.id.cmp(&b.id))
        });
    if let Some(red) = nearest {
        return ActorOutput::Control(steer_toward(kin, spec, red.pos, spec.max_speed, dt));
    }
    let omega = patrol_speed / patrol_radius;
    let slot_angle = TAU * team_index as f64 / team_size.max(1) as f64 + omega * t as f64 * dt;
    let slot = zone.center + Vec2::from_angle(slot_angle) * patrol_radius;
    let carrot = zone.center + Vec2::from_angle(slot_angle + PATROL_LEAD) * patrol_radius;
    let speed = if kin.pos.distance(slot) > PATROL_CATCH_UP { spec.max_speed } else { patrol_speed };
    ActorOutput::Control(steer_toward(kin, spec, carrot, speed, dt))
}

/// Heads for the zone center at full speed with Gaussian heading noise of
/// standard deviation `sigma`. One normal draw per call, whatever `sigma`.
pub fn scripted_red_policy(kin: &KinematicState, spec: &UavSpec, zone: &Zone, sigma: f64, rng: &mut StreamRng, dt: f64) -> ActorOutput {
    let z: f64 = rng.sample(StandardNormal);
    let desired = (zone.center - kin.pos).angle() + sigma * z;
    let d_heading = (angle_diff(desired, kin.heading) / dt).clamp(-spec.max_turn_rate, spec.max_turn_rate);
    ActorOutput::Control(ControlInput { d_speed: spec.max_accel, d_heading })
}

#[derive(Debug, Default)]
pub struct WaypointActor;

impl Actor for WaypointActor {
    fn kind(&self) -> &str {
        names::WAYPOINT
    }

    fn act(&mut self, ctx: &mut ActorContext<'_>) -> ActorOutput {
        let uav = ctx.world.uav(ctx.uav).expect("actor bound to a live id");
        waypoint_policy(&uav.kin, &uav.spec, ctx.waypoints, ctx.world.config().dt)
    }
}

#[derive(Debug, Default)]
pub struct HeuristicBlue;

impl Actor for HeuristicBlue {
    fn kind(&self) -> &str {
        names::HEURISTIC_BLUE
    }

    fn act(&mut self, ctx: &mut ActorContext<'_>) -> ActorOutput {
        let world = ctx.world;
        let uav = world.uav(ctx.uav).expect("actor bound to a live id");
        let cfg = world.config();
        heuristic_blue_policy(
            ctx.perceived,
            &uav.kin,
            &uav.spec,
            &world.zone,
            ctx.team_index,
            cfg.count(uav.team),
            cfg.agents.patrol_radius,
            cfg.agents.patrol_speed,
            world.t,
            cfg.dt,
        )
    }
}

/// Scripted intruder with its own noise stream.
#[derive(Debug)]
pub struct ScriptedRed {
    rng: StreamRng,
}

impl ScriptedRed {
    pub fn new(rng: StreamRng) -> Self {
        Self { rng }
    }
}

impl Actor for ScriptedRed {
    fn kind(&self) -> &str {
        names::SCRIPTED_RED
    }

    fn act(&mut self, ctx: &mut ActorContext<'_>) -> ActorOutput {
        let world = ctx.world;
        let uav = world.uav(ctx.uav).expect("actor bound to a live id");
        let cfg = world.config();
        scripted_red_policy(&uav.kin, &uav.spec, &world.zone, cfg.agents.red_heading_noise, &mut self.rng, cfg.dt)
    }
}
