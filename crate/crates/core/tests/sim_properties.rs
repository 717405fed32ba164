use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use hmt_core::mdp::{compute_reward, encode_frame, nearest_red, ObservationLayout, RewardConfig};
use hmt_core::rng::{stream_rng, Stream, StreamRng};
use hmt_core::sim::*;
use proptest::prelude::*;
use rand::Rng;

fn scenario(kind: u8) -> EpisodeConfig {
    match kind % 3 {
        0 => EpisodeConfig::default(),
        1 => EpisodeConfig::reduced(),
        _ => EpisodeConfig { blue_count: 3, red_count: 2, max_steps: 120, ..EpisodeConfig::reduced() },
    }
}

/// Random controls, deliberately exceeding the airframe limits.
fn random_controls(world: &World, rng: &mut StreamRng) -> BTreeMap<EntityId, ControlInput> {
    world
        .uavs
        .iter()
        .map(|u| {
            let s = u.spec;
            let c = ControlInput::new(rng.random_range(-2.0..2.0) * s.max_accel, rng.random_range(-2.0..2.0) * s.max_turn_rate);
            (u.id, c)
        })
        .collect()
}

/// Every step's events and the final outcome.
fn run(cfg: &Arc<EpisodeConfig>, seed: u64, control_seed: u64) -> (Vec<Vec<Event>>, Option<Outcome>, Vec<EntitySnapshot>) {
    let mut w = World::new(cfg.clone(), seed).unwrap();
    let mut rng = stream_rng(control_seed, Stream::Exploration, 0);
    let mut log = Vec::new();
    while !w.is_terminated() {
        let c = random_controls(&w, &mut rng);
        log.push(w.step(&c).unwrap().events);
    }
    (log, w.outcome, w.uavs.iter().map(EntitySnapshot::from).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn identical_inputs_give_identical_episodes(kind in 0u8..3, seed in any::<u64>(), cs in any::<u64>()) {
        let cfg = Arc::new(scenario(kind));
        prop_assert_eq!(run(&cfg, seed, cs), run(&cfg, seed, cs));
    }

    #[test]
    fn kinematics_stay_in_envelope(kind in 0u8..3, seed in any::<u64>(), cs in any::<u64>()) {
        let cfg = Arc::new(scenario(kind));
        let mut w = World::new(cfg, seed).unwrap();
        let mut rng = stream_rng(cs, Stream::Exploration, 0);
        while !w.is_terminated() {
            let c = random_controls(&w, &mut rng);
            w.step(&c).unwrap();
            for u in w.uavs.iter().filter(|u| u.is_active()) {
                prop_assert!(u.kin.pos.is_finite());
                prop_assert!((0.0..TAU).contains(&u.kin.heading));
                prop_assert!(u.kin.speed >= u.spec.min_speed && u.kin.speed <= u.spec.max_speed);
            }
        }
    }

    #[test]
    fn step_integrates_every_uav_from_the_pre_step_state(kind in 0u8..3, seed in any::<u64>(), cs in any::<u64>()) {
        let cfg = Arc::new(scenario(kind));
        let mut w = World::new(cfg.clone(), seed).unwrap();
        let mut rng = stream_rng(cs, Stream::Exploration, 0);
        while !w.is_terminated() {
            let c = random_controls(&w, &mut rng);
            let before = w.clone();
            w.step(&c).unwrap();
            // each UAV on its own, visiting them in reverse order
            for u in before.uavs.iter().rev() {
                let want = if u.is_active() { u.kin.integrate(&u.spec, c[&u.id], cfg.dt) } else { u.kin };
                prop_assert_eq!(w.uav(u.id).unwrap().kin, want);
            }
        }
    }

    #[test]
    fn neutralized_uavs_stay_frozen(seed in any::<u64>(), cs in any::<u64>()) {
        // two reds so the episode can continue after the first neutralization
        let cfg = Arc::new(EpisodeConfig { red_count: 2, blue_count: 4, ..EpisodeConfig::reduced() });
        let mut w = World::new(cfg, seed).unwrap();
        let mut rng = stream_rng(cs, Stream::Exploration, 0);
        let mut frozen: BTreeMap<EntityId, KinematicState> = BTreeMap::new();
        while !w.is_terminated() {
            // blues chase the nearest red so neutralizations actually happen
            let mut c = random_controls(&w, &mut rng);
            for b in w.team_uavs(Team::Blue) {
                if let Some(r) = w.team_uavs(Team::Red).filter(|r| r.is_active()).min_by(|a, z| {
                    b.kin.pos.distance(a.kin.pos).total_cmp(&b.kin.pos.distance(z.kin.pos))
                }) {
                    c.insert(b.id, hmt_core::agents::steer_toward(&b.kin, &b.spec, r.kin.pos, b.spec.max_speed, 1.0));
                }
            }
            w.step(&c).unwrap();
            for (id, kin) in &frozen {
                prop_assert_eq!(w.uav(*id).unwrap().kin, *kin);
                prop_assert_eq!(w.uav(*id).unwrap().status, UavStatus::Neutralized);
            }
            for u in w.uavs.iter().filter(|u| !u.is_active()) {
                frozen.entry(u.id).or_insert(u.kin);
            }
        }
    }

    #[test]
    fn every_episode_has_one_outcome_within_the_horizon(kind in 0u8..3, seed in any::<u64>(), cs in any::<u64>()) {
        let cfg = Arc::new(scenario(kind));
        let mut w = World::new(cfg.clone(), seed).unwrap();
        let mut rng = stream_rng(cs, Stream::Exploration, 0);
        let mut outcomes = 0;
        while !w.is_terminated() {
            let c = random_controls(&w, &mut rng);
            outcomes += w.step(&c).unwrap().outcome.is_some() as usize;
        }
        prop_assert_eq!(outcomes, 1);
        prop_assert!(w.t <= cfg.max_steps);
        prop_assert!(w.step(&BTreeMap::new()).is_err());
        let o = w.outcome.unwrap();
        prop_assert_eq!(o.blue_won(), o.reason != OutcomeReason::Intrusion);
    }

    #[test]
    fn shaping_telescopes_over_an_episode(seed in any::<u64>(), cs in any::<u64>()) {
        let mut cfg = EpisodeConfig::reduced();
        cfg.reward = RewardConfig { r_win: 0.0, r_lose: 0.0, shaping_k: 0.37 };
        let cfg = Arc::new(cfg);
        let mut w = World::new(cfg.clone(), seed).unwrap();
        let blues: Vec<EntityId> = w.team_uavs(Team::Blue).map(|u| u.id).collect();
        let d0: Vec<f64> = blues.iter().map(|b| nearest_red(&w, *b).unwrap().1).collect();
        let red = w.team_uavs(Team::Red).next().unwrap().id;
        let mut sums = vec![0.0; blues.len()];
        let mut rng = stream_rng(cs, Stream::Exploration, 0);
        while !w.is_terminated() {
            let c = random_controls(&w, &mut rng);
            let before = w.clone();
            let out = w.step(&c).unwrap();
            for (s, b) in sums.iter_mut().zip(&blues) {
                *s += compute_reward(&before, &w, *b, out.outcome, &cfg.reward);
            }
        }
        let scale = cfg.map.half_extent();
        for ((s, b), d0) in sums.iter().zip(&blues).zip(d0) {
            let dt = w.uav(*b).unwrap().kin.pos.distance(w.uav(red).unwrap().kin.pos) / scale;
            prop_assert!((s - 0.37 * (d0 - dt)).abs() < 1e-12, "{} vs {}", s, 0.37 * (d0 - dt));
        }
    }

    #[test]
    fn frames_are_translation_invariant(kind in 0u8..3, seed in any::<u64>(), dx in -500.0f64..500.0, dy in -500.0f64..500.0) {
        let cfg = Arc::new(scenario(kind));
        let mut w = World::new(cfg.clone(), seed).unwrap();
        for _ in 0..5 {
            if !w.is_terminated() {
                w.step(&BTreeMap::new()).unwrap();
            }
        }
        let mut moved = w.clone();
        let d = Vec2::new(dx, dy);
        moved.uavs.iter_mut().for_each(|u| u.kin.pos += d);
        moved.fixed_sensors.iter_mut().for_each(|f| f.pos += d);
        moved.zone.center += d;
        for b in w.team_uavs(Team::Blue).filter(|u| u.is_active()) {
            for mode in [ObservabilityMode::FullAwareness, ObservabilityMode::TeamShared, ObservabilityMode::OwnSensorsOnly] {
                let a = encode_frame(&w, b.id, mode).unwrap();
                let m = encode_frame(&moved, b.id, mode).unwrap();
                for (x, y) in a.0.iter().zip(&m.0) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn frame_length_is_fixed_by_team_sizes(kind in 0u8..3, seed in any::<u64>(), cs in any::<u64>()) {
        let cfg = Arc::new(scenario(kind));
        let want = ObservationLayout::new(cfg.blue_count, cfg.red_count).frame_len();
        let mut w = World::new(cfg.clone(), seed).unwrap();
        let mut rng = stream_rng(cs, Stream::Exploration, 0);
        while !w.is_terminated() {
            for b in w.team_uavs(Team::Blue) {
                let f = encode_frame(&w, b.id, cfg.blue.observability).unwrap();
                prop_assert_eq!(f.0.len(), want);
                prop_assert!(f.0.iter().all(|v| v.abs() <= 1.5));
            }
            let c = random_controls(&w, &mut rng);
            w.step(&c).unwrap();
        }
    }
}

#[test]
fn spawn_draws_ignore_sensor_configuration() {
    let a = EpisodeConfig::default();
    let mut b = EpisodeConfig::default();
    b.blue.sensors.push(Sensor::omni(50.0, 0.5));
    b.fixed_sensors.clear();
    let wa = World::new(Arc::new(a), 77).unwrap();
    let wb = World::new(Arc::new(b), 77).unwrap();
    for (x, y) in wa.uavs.iter().zip(&wb.uavs) {
        assert_eq!(x.kin, y.kin);
    }
}
