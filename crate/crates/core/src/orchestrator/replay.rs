use std::sync::Arc;

use serde::Serialize;
use serde_json::Value;

use super::record::{EpisodeRecord, EPISODE_FORMAT};
use super::runner::{EpisodeRunner, PolicyRegistry};
use super::OrchestratorError;
use crate::mdp::OBSERVATION_LAYOUT_VERSION;

fn incompatible(what: &str, found: &str, expected: &str) -> OrchestratorError {
    OrchestratorError::Incompatible(format!("{what} {found:?}, this build expects {expected:?}"))
}

fn check_versions(record: &EpisodeRecord) -> Result<(), OrchestratorError> {
    let h = &record.header;
    if h.format != EPISODE_FORMAT {
        return Err(incompatible("episode format", &h.format, EPISODE_FORMAT));
    }
    if h.software_version != crate::SOFTWARE_VERSION {
        return Err(incompatible("software version", &h.software_version, crate::SOFTWARE_VERSION));
    }
    if h.observation_layout != OBSERVATION_LAYOUT_VERSION {
        return Err(incompatible("observation layout", &h.observation_layout, OBSERVATION_LAYOUT_VERSION));
    }
    Ok(())
}

/// Names the first top-level field where the two serialized values differ.
fn first_difference<T: Serialize>(got: &T, want: &T) -> Option<String> {
    let got = serde_json::to_string(got).expect("records serialize");
    let want = serde_json::to_string(want).expect("records serialize");
    if got == want {
        return None;
    }
    let (Ok(Value::Object(g)), Ok(Value::Object(w))) =
        (serde_json::from_str::<Value>(&got), serde_json::from_str::<Value>(&want))
    else {
        return Some("value".into());
    };
    let field = w.keys().chain(g.keys()).find(|k| g.get(*k) != w.get(*k)).cloned().unwrap_or_else(|| "value".into());
    Some(field)
}

/// Re-simulates `record` from its header, re-applying the recorded operator
/// commands before the steps they were applied at, and checks that every
/// step and the footer serialize identically. Wall time and pause spans
/// are not compared.
pub fn replay_episode(record: &EpisodeRecord, policies: &PolicyRegistry) -> Result<EpisodeRecord, OrchestratorError> {
    check_versions(record)?;
    let h = &record.header;
    for (id, digest) in &h.policies {
        match policies.get(id) {
            Some(net) if format!("{:016x}", net.digest()) == *digest => {}
            Some(_) => return Err(OrchestratorError::Incompatible(format!("policy {id:?} parameters differ from the recording"))),
            None => return Err(OrchestratorError::Binding(format!("unknown policy {id:?}"))),
        }
    }
    let mut runner = EpisodeRunner::new(Arc::new(h.config.clone()), h.seed, h.bindings.clone(), policies)?;
    if let Some(field) = first_difference(runner.header(), &record.header) {
        return Err(OrchestratorError::Integrity { t: 0, detail: format!("header field {field:?} differs") });
    }
    for want in &record.steps {
        if runner.is_done() {
            return Err(OrchestratorError::Integrity { t: want.t, detail: "episode ended earlier on replay".into() });
        }
        for cmd in &want.commands {
            runner
                .submit(*cmd)
                .map_err(|e| OrchestratorError::Integrity { t: want.t, detail: format!("recorded command rejected: {e}") })?;
        }
        let got = runner.step()?;
        if let Some(field) = first_difference(got, want) {
            return Err(OrchestratorError::Integrity { t: want.t, detail: format!("step field {field:?} differs") });
        }
    }
    if !runner.is_done() {
        return Err(OrchestratorError::Integrity {
            t: record.steps.len() as u64,
            detail: "episode continues past the recorded end".into(),
        });
    }
    let mut replayed = runner.finish()?;
    if let Some(field) = first_difference(&replayed.footer.without_timing(), &record.footer.without_timing()) {
        return Err(OrchestratorError::Integrity { t: record.steps.len() as u64, detail: format!("footer field {field:?} differs") });
    }
    replayed.footer.wall_time_ms = record.footer.wall_time_ms;
    replayed.footer.pauses = record.footer.pauses.clone();
    Ok(replayed)
}
