//! Experimental online learning from interactive sessions.
//!
//! Serves sessions whose blue UAVs run the latest network under the
//! operator's waypoint follower. Every finished episode is fed to the
//! learner and the updated network becomes the default for new sessions.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use hmt_core::learner::{Checkpoint, OnlineLearner};
use hmt_core::mdp::ObservationLayout;
use hmt_core::orchestrator::{episode_transitions, RunStore};
use hmt_service::protocol::Pacing;
use hmt_service::{AppState, ServiceConfig};

use crate::commands::train_config;
use crate::{io, TrainArgs};

pub fn run(a: TrainArgs) -> Result<ExitCode> {
    let cfg = train_config(&a)?;
    let scenario = io::scenario(&a.scenario.scenario)?;
    let demos = a.demos.as_deref().map(io::demos).transpose()?;
    let seed = cfg.seeds.first().copied().unwrap_or(0);
    let layout = ObservationLayout::new(scenario.blue_count, scenario.red_count);
    let mut learner = OnlineLearner::new(&cfg, layout, demos, seed)?;

    let store = RunStore::open(a.out.join("episodes"))?;
    let state = AppState::new(ServiceConfig {
        store: Some(store.clone()),
        default_config: (*scenario).clone(),
        pacing: Pacing::default(),
        ..ServiceConfig::default()
    });
    let mut version = 0;
    state.publish_policy(&format!("online-{version}"), Arc::new(learner.net().clone()), true);

    let rt = tokio::runtime::Runtime::new()?;
    let addr = format!("127.0.0.1:{}", a.port).parse().context("listen address")?;
    let server = rt.spawn(hmt_service::serve(state.clone(), addr));
    eprintln!("serving on http://{addr}; waiting for {} finished sessions", a.sessions);

    let ckpt_dir = a.out.join("checkpoints");
    std::fs::create_dir_all(&ckpt_dir)?;
    let mut seen = BTreeSet::new();
    let mut wins = 0;
    while seen.len() < a.sessions {
        if server.is_finished() {
            rt.block_on(server)??;
            anyhow::bail!("server stopped");
        }
        for entry in store.list()? {
            if seen.len() == a.sessions || !seen.insert(entry.id.clone()) {
                continue;
            }
            let record = store.load(&entry.id)?;
            let steps = learner.observe(episode_transitions(&record))?;
            wins += record.blue_won() as usize;
            version += 1;
            let id = format!("online-{version}");
            state.publish_policy(&id, Arc::new(learner.net().clone()), true);
            // success rate of the interactive episodes learned from so far
            let success_rate = wins as f64 / seen.len() as f64;
            let ckpt = Checkpoint { seed, episode: version, success_rate, layout, net: learner.net().clone() };
            ckpt.save(&ckpt_dir.join(format!("{id}.json")))?;
            println!("episode {} ({:?}): {steps} updates, now serving {id}", entry.id, entry.outcome);
        }
        std::thread::sleep(Duration::from_millis(200));
    }
    println!("{} updates from {} transitions", learner.updates(), learner.transitions());
    Ok(ExitCode::SUCCESS)
}
