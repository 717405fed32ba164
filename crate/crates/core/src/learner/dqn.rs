use rand::Rng;

use super::demo::{DemoStore, Transition, TransitionSource};
use super::net::DuelingQNet;
use super::replay::{sample_distinct, ReplayBuffer};
use super::{LearnerError, Variant};
use crate::rng::StreamRng;

/// Anything that maps a batch of observations to action values.
pub trait QFunction {
    fn num_actions(&self) -> usize;

    /// `inputs` is `batch × input_len`, row-major; returns `batch × actions`.
    fn q_batch(&self, inputs: &[f64], batch: usize) -> Vec<f64>;
}

impl QFunction for DuelingQNet {
    fn num_actions(&self) -> usize {
        self.shape().actions
    }

    fn q_batch(&self, inputs: &[f64], batch: usize) -> Vec<f64> {
        self.forward(inputs, batch).q
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy over `q`. Always consumes one uniform draw so the stream stays
/// aligned regardless of `eps`.
pub fn select_action(q: &[f64], eps: f64, rng: &mut StreamRng) -> usize {
    let u: f64 = rng.random();
    if u < eps {
        rng.random_range(0..q.len())
    } else {
        greedy_action(q)
    }
}

fn stack_rows<'a>(rows: impl Iterator<Item = &'a [f64]>) -> Vec<f64> {
    rows.flat_map(|r| r.iter().copied()).collect()
}

/// Double-DQN targets: the online net picks the greedy action at `s'`, the target
/// net scores it. Terminal transitions bootstrap nothing.
pub fn td_targets(batch: &[&Transition], online: &dyn QFunction, target: &dyn QFunction, gamma: f64) -> Vec<f64> {
    let n = batch.len();
    let next = stack_rows(batch.iter().map(|t| t.next_obs.as_slice()));
    let q_online = online.q_batch(&next, n);
    let q_target = target.q_batch(&next, n);
    let a = online.num_actions();
    batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.terminal {
                t.reward
            } else {
                let row = i * a;
                let best = greedy_action(&q_online[row..row + a]);
                t.reward + gamma * q_target[row + best]
            }
        })
        .collect()
}

/// Mean Huber loss (δ = 1) and its gradient with respect to `pred`.
pub fn huber_loss_and_grad(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, y)| {
            let e = p - y;
            if e.abs() <= 1.0 {
                loss += 0.5 * e * e;
                e / n
            } else {
                loss += e.abs() - 0.5;
                e.signum() / n
            }
        })
        .collect();
    (loss / n, grad)
}

/// Loss of `online` on `batch` against fixed double-DQN targets, and the
/// gradient with respect to the online parameters.
pub fn loss_and_gradient(online: &DuelingQNet, target: &DuelingQNet, batch: &[&Transition], gamma: f64) -> (f64, Vec<f64>) {
    let ys = td_targets(batch, online, target, gamma);
    let n = batch.len();
    let a = online.num_actions();
    let obs = stack_rows(batch.iter().map(|t| t.obs.as_slice()));
    let cache = online.forward(&obs, n);
    let pred: Vec<f64> = batch.iter().enumerate().map(|(i, t)| cache.q[i * a + t.action]).collect();
    let (loss, dpred) = huber_loss_and_grad(&pred, &ys);
    let mut dq = vec![0.0; n * a];
    for (i, t) in batch.iter().enumerate() {
        dq[i * a + t.action] = dpred[i];
    }
    let mut grad = vec![0.0; online.num_params()];
    online.backward(&cache, &dq, &mut grad);
    (loss, grad)
}

/// SGD with heavy-ball momentum and optional global-norm clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    pub max_grad_norm: f64,
    velocity: Vec<f64>,
}

impl SgdMomentum {
    pub fn new(num_params: usize, lr: f64, momentum: f64, max_grad_norm: f64) -> Self {
        Self { lr, momentum, max_grad_norm, velocity: vec![0.0; num_params] }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let scale = if self.max_grad_norm > 0.0 && norm > self.max_grad_norm { self.max_grad_norm / norm } else { 1.0 };
        for ((p, v), g) in params.iter_mut().zip(&mut self.velocity).zip(grad) {
            *v = self.momentum * *v + g * scale;
            *p -= self.lr * *v;
        }
    }
}

/// One gradient step on `batch`. Returns the pre-update loss.
pub fn update_step(
    online: &mut DuelingQNet,
    target: &DuelingQNet,
    opt: &mut SgdMomentum,
    batch: &[&Transition],
    gamma: f64,
    update: u64,
) -> Result<f64, LearnerError> {
    let (loss, grad) = loss_and_gradient(online, target, batch, gamma);
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(LearnerError::NonFiniteLoss { loss, update });
    }
    opt.step(online.params_mut(), &grad);
    Ok(loss)
}

/// Source counts of one mini-batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchComposition {
    pub human: usize,
    pub agent: usize,
    pub online: usize,
}

impl BatchComposition {
    pub fn total(&self) -> usize {
        self.human + self.agent + self.online
    }

    pub fn demos(&self) -> usize {
        self.human + self.agent
    }
}

pub fn batch_composition(variant: Variant, demo_ratio: f64, batch_size: usize) -> BatchComposition {
    // the epsilon keeps exact products like 0.25 · 64 from rounding up
    let demos = ((demo_ratio * batch_size as f64) - 1e-9).ceil().clamp(0.0, batch_size as f64) as usize;
    let online = batch_size - demos;
    match variant {
        Variant::Plain => BatchComposition { human: 0, agent: 0, online: batch_size },
        Variant::Ph => BatchComposition { human: 0, agent: demos, online },
        Variant::Mh => BatchComposition { human: demos - demos / 2, agent: demos / 2, online },
    }
}

/// Draws a mini-batch with the given composition; each pool is sampled
/// uniformly without replacement. Demonstrations come first, human then
/// agent, followed by online transitions.
pub fn sample_batch<'a>(
    replay: &'a ReplayBuffer,
    demos: &'a DemoStore,
    comp: BatchComposition,
    rng: &mut StreamRng,
) -> Result<Vec<&'a Transition>, LearnerError> {
    let short = |pool, needed, available| LearnerError::InsufficientPool { pool, needed, available };
    let mut out = Vec::with_capacity(comp.total());
    for (name, source, needed) in
        [("demo_human", TransitionSource::DemoHuman, comp.human), ("demo_agent", TransitionSource::DemoAgent, comp.agent)]
    {
        if needed > 0 {
            let pool = demos.pool(source);
            out.extend(sample_distinct(pool, needed, rng).ok_or(short(name, needed, pool.len()))?);
        }
    }
    if comp.online > 0 {
        out.extend(replay.sample(comp.online, rng).ok_or(short("online", comp.online, replay.len()))?);
    }
    Ok(out)
}
