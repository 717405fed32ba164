use serde::{Deserialize, Serialize};

use super::LearnerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// No demonstrations.
    Plain,
    /// Demonstrations from a trained agent.
    Ph,
    /// Human and agent demonstrations in equal proportion.
    Mh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub variant: Variant,
    pub gamma: f64,
    pub lr: f64,
    pub momentum: f64,
    /// Global gradient-norm clip; `0` disables clipping.
    pub max_grad_norm: f64,
    pub batch_size: usize,
    /// Fraction of each mini-batch drawn from demonstrations.
    pub demo_ratio: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_episodes: u64,
    pub target_sync_steps: u64,
    pub replay_capacity: usize,
    /// Transitions collected before the first gradient step.
    pub warmup_transitions: usize,
    pub hidden: Vec<usize>,
    pub max_episodes: u64,
    pub eval_every_episodes: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
    /// Ends a run at the first evaluation whose success rate reaches this value.
    pub stop_at_success: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Plain,
            gamma: 0.99,
            lr: 1e-2,
            momentum: 0.9,
            max_grad_norm: 10.0,
            batch_size: 64,
            demo_ratio: 0.0,
            eps_start: 1.0,
            eps_end: 0.05,
            eps_decay_episodes: 500,
            target_sync_steps: 1000,
            replay_capacity: 100_000,
            warmup_transitions: 1000,
            hidden: vec![64, 64],
            max_episodes: 5000,
            eval_every_episodes: 100,
            eval_episodes: 30,
            seeds: vec![1, 2, 3, 4, 5],
            stop_at_success: None,
        }
    }
}

impl TrainConfig {
    /// Defaults for a variant: demonstrations make up a quarter of each
    /// batch for `Ph` and `Mh`.
    pub fn for_variant(variant: Variant) -> Self {
        let demo_ratio = if variant == Variant::Plain { 0.0 } else { 0.25 };
        Self { variant, demo_ratio, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let err = |m: &str| Err(LearnerError::Config(m.to_owned()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return err("gamma must lie in [0, 1]");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return err("lr must be > 0");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return err("momentum must lie in [0, 1)");
        }
        if !(self.max_grad_norm.is_finite() && self.max_grad_norm >= 0.0) {
            return err("max_grad_norm must be >= 0");
        }
        if self.batch_size == 0 {
            return err("batch_size must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.demo_ratio) {
            return err("demo_ratio must lie in [0, 1]");
        }
        match self.variant {
            Variant::Plain if self.demo_ratio != 0.0 => return err("plain variant requires demo_ratio = 0"),
            Variant::Ph | Variant::Mh if self.demo_ratio == 0.0 => {
                return err("demonstration variants require demo_ratio > 0")
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return err("epsilon bounds must lie in [0, 1]");
        }
        if self.target_sync_steps == 0 {
            return err("target_sync_steps must be >= 1");
        }
        if self.replay_capacity < self.batch_size {
            return err("replay_capacity must hold at least one batch");
        }
        if self.eval_every_episodes == 0 || self.eval_episodes == 0 {
            return err("evaluation cadence and size must be >= 1");
        }
        if self.stop_at_success.is_some_and(|s| !(0.0..=1.0).contains(&s)) {
            return err("stop_at_success must lie in [0, 1]");
        }
        if self.seeds.is_empty() {
            return err("at least one seed is required");
        }
        if self.hidden.contains(&0) {
            return err("hidden layer widths must be >= 1");
        }
        Ok(())
    }
}
