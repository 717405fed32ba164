use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{DuelingQNet, NetShape};
use super::LearnerError;
use crate::mdp::{ObservationLayout, OBSERVATION_LAYOUT_VERSION};

pub const CHECKPOINT_FORMAT: &str = "hmt-ckpt/1";

/// A network snapshot taken at an evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub episode: u64,
    pub success_rate: f64,
    pub layout: ObservationLayout,
    pub net: DuelingQNet,
}

/// On-disk JSON form of a [`Checkpoint`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub format: String,
    pub observation_layout: String,
    pub software_version: String,
    pub seed: u64,
    pub episode: u64,
    pub success_rate: f64,
    pub blue_count: usize,
    pub red_count: usize,
    pub shape: NetShape,
    pub params: Vec<f64>,
}

impl From<&Checkpoint> for CheckpointFile {
    fn from(c: &Checkpoint) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            observation_layout: OBSERVATION_LAYOUT_VERSION.into(),
            software_version: crate::SOFTWARE_VERSION.into(),
            seed: c.seed,
            episode: c.episode,
            success_rate: c.success_rate,
            blue_count: c.layout.blue_count,
            red_count: c.layout.red_count,
            shape: c.net.shape().clone(),
            params: c.net.params().to_vec(),
        }
    }
}

impl TryFrom<CheckpointFile> for Checkpoint {
    type Error = LearnerError;

    fn try_from(f: CheckpointFile) -> Result<Self, LearnerError> {
        if f.format != CHECKPOINT_FORMAT {
            return Err(LearnerError::Checkpoint(format!("unsupported format {:?}", f.format)));
        }
        if f.observation_layout != OBSERVATION_LAYOUT_VERSION {
            return Err(LearnerError::Checkpoint(format!(
                "observation layout {:?} does not match {OBSERVATION_LAYOUT_VERSION:?}",
                f.observation_layout
            )));
        }
        let layout = ObservationLayout::new(f.blue_count, f.red_count);
        if f.shape.input != layout.stacked_len() {
            return Err(LearnerError::Checkpoint(format!(
                "network input {} does not fit a {}v{} layout ({})",
                f.shape.input,
                f.blue_count,
                f.red_count,
                layout.stacked_len()
            )));
        }
        let net = DuelingQNet::from_params(f.shape, f.params)?;
        Ok(Checkpoint { seed: f.seed, episode: f.episode, success_rate: f.success_rate, layout, net })
    }
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&CheckpointFile::from(self)).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LearnerError> {
        let file: CheckpointFile = serde_json::from_str(s).map_err(|e| LearnerError::Checkpoint(e.to_string()))?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnerError> {
        std::fs::write(path, self.to_json()).map_err(|e| LearnerError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, LearnerError> {
        let s = std::fs::read_to_string(path).map_err(|e| LearnerError::Checkpoint(format!("{}: {e}", path.display())))?;
        Self::from_json(&s)
    }
}
