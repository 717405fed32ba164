use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionSource {
    Online,
    DemoAgent,
    DemoHuman,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// Present even for terminal transitions; masked out of the bootstrap.
    pub next_obs: Vec<f64>,
    pub terminal: bool,
    pub source: TransitionSource,
}

/// Immutable demonstration pools, split by source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DemoStore {
    human: Vec<Transition>,
    agent: Vec<Transition>,
}

impl DemoStore {
    /// Online-tagged transitions are dropped.
    pub fn new(transitions: impl IntoIterator<Item = Transition>) -> Self {
        let mut store = Self::default();
        for t in transitions {
            match t.source {
                TransitionSource::DemoHuman => store.human.push(t),
                TransitionSource::DemoAgent => store.agent.push(t),
                TransitionSource::Online => {}
            }
        }
        store
    }

    pub fn human(&self) -> &[Transition] {
        &self.human
    }

    pub fn agent(&self) -> &[Transition] {
        &self.agent
    }

    pub fn pool(&self, source: TransitionSource) -> &[Transition] {
        match source {
            TransitionSource::DemoHuman => &self.human,
            TransitionSource::DemoAgent => &self.agent,
            TransitionSource::Online => &[],
        }
    }

    pub fn count(&self, source: TransitionSource) -> usize {
        self.pool(source).len()
    }

    pub fn len(&self) -> usize {
        self.human.len() + self.agent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keeps only the listed sources.
    pub fn filter(&self, sources: &[TransitionSource]) -> DemoStore {
        let keep = |s| sources.contains(&s);
        DemoStore {
            human: if keep(TransitionSource::DemoHuman) { self.human.clone() } else { Vec::new() },
            agent: if keep(TransitionSource::DemoAgent) { self.agent.clone() } else { Vec::new() },
        }
    }

    /// Concatenates the pools of two stores.
    pub fn merge(mut self, other: DemoStore) -> DemoStore {
        self.human.extend(other.human);
        self.agent.extend(other.agent);
        self
    }
}
