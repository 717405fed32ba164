use std::collections::{BTreeMap, BTreeSet};

use super::record::EpisodeRecord;
use super::OrchestratorError;
use crate::learner::{DemoStore, Transition, TransitionSource};
use crate::mdp::{quantize_control, stack, ObservationFrame, HISTORY_LEN};
use crate::sim::{EntityId, Team};

#[derive(Debug, Clone, PartialEq)]
pub struct DemoFilter {
    /// Keep only episodes Blue won.
    pub winners_only: bool,
    /// Keep only these provenance tags; `None` keeps both.
    pub sources: Option<Vec<TransitionSource>>,
}

impl Default for DemoFilter {
    fn default() -> Self {
        Self { winners_only: true, sources: None }
    }
}

/// Blue UAVs that received at least one operator command.
fn commanded(record: &EpisodeRecord) -> BTreeSet<EntityId> {
    record.steps.iter().flat_map(|s| s.commands.iter().map(|c| c.uav_id())).collect()
}

/// Per-blue transitions of one recorded episode. A UAV that received any
/// operator command contributes `DemoHuman` transitions, every other blue
/// UAV `DemoAgent`. Actions come from the policy when it was in control,
/// otherwise from quantizing the applied control.
pub fn episode_transitions(record: &EpisodeRecord) -> Vec<Transition> {
    let human = commanded(record);
    let specs: BTreeMap<EntityId, _> = record.header.initial.iter().map(|s| (s.id, s.team)).collect();
    let spec = &record.header.config.blue.spec;
    let last = record.steps.len().saturating_sub(1);
    let mut histories: BTreeMap<EntityId, Vec<ObservationFrame>> = BTreeMap::new();
    let mut out = Vec::new();

    for (k, step) in record.steps.iter().enumerate() {
        for u in step.uavs.iter().filter(|u| specs.get(&u.id) == Some(&Team::Blue)) {
            let Some(frame) = &u.frame else { continue };
            let hist = histories.entry(u.id).or_default();
            hist.push(frame.clone());
            let next_frame = match record.steps.get(k + 1) {
                Some(next) => next.uavs.iter().find(|n| n.id == u.id).and_then(|n| n.frame.clone()),
                None => record.footer.final_frames.get(&u.id).cloned(),
            };
            let Some(next_frame) = next_frame else { continue };
            let obs = stack(&hist[hist.len().saturating_sub(HISTORY_LEN)..]).expect("history is non-empty");
            let mut next_hist = hist[hist.len().saturating_sub(HISTORY_LEN - 1)..].to_vec();
            next_hist.push(next_frame);
            let next_obs = stack(&next_hist).expect("history is non-empty");
            out.push(Transition {
                obs: obs.0,
                action: u.action.unwrap_or_else(|| quantize_control(u.control, spec)),
                reward: u.reward.unwrap_or(0.0),
                next_obs: next_obs.0,
                terminal: k == last,
                source: if human.contains(&u.id) { TransitionSource::DemoHuman } else { TransitionSource::DemoAgent },
            });
        }
    }
    out
}

/// Number of transitions per source, and episodes used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct DemoSummary {
    pub episodes: usize,
    pub human: usize,
    pub agent: usize,
}

pub fn build_demo_store(records: &[EpisodeRecord], filter: &DemoFilter) -> Result<(DemoStore, DemoSummary), OrchestratorError> {
    let kept: Vec<&EpisodeRecord> = records.iter().filter(|r| !filter.winners_only || r.blue_won()).collect();
    let transitions = kept
        .iter()
        .flat_map(|r| episode_transitions(r))
        .filter(|t| filter.sources.as_ref().is_none_or(|s| s.contains(&t.source)));
    let store = DemoStore::new(transitions);
    if store.is_empty() {
        return Err(OrchestratorError::EmptyDemos(format!(
            "{} of {} episodes passed the filter and yielded no transitions",
            kept.len(),
            records.len()
        )));
    }
    let summary = DemoSummary {
        episodes: kept.len(),
        human: store.count(TransitionSource::DemoHuman),
        agent: store.count(TransitionSource::DemoAgent),
    };
    Ok((store, summary))
}
