//! Per-UE double-DQN learner: epsilon-greedy policy, FIFO replay memory,
//! target computation and minibatch gradient steps.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FrlError, Result};
use crate::nn::{Activations, Mlp, MlpSpec, Sgd};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub obs: Vec<S>,
    pub action: usize,
    pub reward: S,
    pub next_obs: Vec<S>,
}

/// Bounded FIFO of transitions; the oldest entry is evicted when full.
#[derive(Debug, Clone)]
pub struct ReplayMemory<S> {
    capacity: usize,
    buffer: VecDeque<Transition<S>>,
}

impl<S: Scalar> ReplayMemory<S> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, buffer: VecDeque::with_capacity(capacity.min(1 << 16)) }
    }

    pub fn push(&mut self, t: Transition<S>) {
        if self.buffer.len() == self.capacity {
            self.buffer.pop_front();
        }
        self.buffer.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &Transition<S> {
        &self.buffer[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<S>> {
        self.buffer.iter()
    }

    /// Uniform minibatch without replacement.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Vec<&Transition<S>> {
        rand::seq::index::sample(rng, self.len(), batch).into_iter().map(|i| &self.buffer[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub discount: f64,
    pub batch_size: usize,
    pub lr: f64,
    /// Heavy-ball momentum; zero means plain gradient descent.
    pub momentum: f64,
    /// Target network refresh period, in agent steps.
    pub target_sync_period: u64,
    pub replay_capacity: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            discount: 0.95,
            batch_size: 32,
            lr: 1e-4,
            momentum: 0.0,
            target_sync_period: 100,
            replay_capacity: 50_000,
            epsilon_start: 1.0,
            epsilon_end: 0.02,
            epsilon_anneal_epochs: 4000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(FrlError::Config("discount must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return Err(FrlError::Config("batch size must be positive and fit in the replay memory".into()));
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(FrlError::Config("lr must be positive and momentum in [0, 1)".into()));
        }
        if self.target_sync_period == 0 || self.epsilon_anneal_epochs == 0 {
            return Err(FrlError::Config("target_sync_period and epsilon_anneal_epochs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_end) {
            return Err(FrlError::Config("epsilon bounds must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Linear anneal from `epsilon_start` to `epsilon_end` over the first
    /// `epsilon_anneal_epochs` epochs, constant afterwards.
    pub fn epsilon(&self, epoch: usize) -> f64 {
        let frac = epoch as f64 / self.epsilon_anneal_epochs as f64;
        (self.epsilon_start - (self.epsilon_start - self.epsilon_end) * frac).max(self.epsilon_end)
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn argmax<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Epsilon-greedy choice over the network's Q-values. One uniform draw is
/// always consumed, plus one more when exploring.
pub fn select_action<S: Scalar, R: Rng + ?Sized>(net: &Mlp<S>, obs: &[S], epsilon: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..net.spec().output_dim())
    } else {
        argmax(&net.forward(obs))
    }
}

/// `r + discount * Q(o', argmax_a Q(o', a; eval); target)`.
pub fn compute_target<S: Scalar>(batch: &[&Transition<S>], eval: &Mlp<S>, target: &Mlp<S>, discount: S) -> Vec<S> {
    assert!(!batch.is_empty(), "empty batch");
    let mut acts_eval = Activations::new(eval.spec());
    let mut acts_target = Activations::new(target.spec());
    batch
        .iter()
        .map(|t| {
            eval.forward_cached(&t.next_obs, &mut acts_eval);
            let best = argmax(acts_eval.output());
            target.forward_cached(&t.next_obs, &mut acts_target);
            t.reward + discount * acts_target.output()[best]
        })
        .collect()
}

/// One minibatch step on the mean squared TD error. Returns the loss before
/// the update, or `None` when the memory holds fewer than `batch_size` items.
pub fn train_step<S: Scalar, R: Rng + ?Sized>(
    memory: &ReplayMemory<S>,
    eval: &mut Mlp<S>,
    target: &Mlp<S>,
    config: &TrainConfig,
    optimizer: &mut Sgd<S>,
    rng: &mut R,
) -> Option<S> {
    if memory.len() < config.batch_size {
        return None;
    }
    let batch = memory.sample(rng, config.batch_size);
    let targets = compute_target(&batch, eval, target, S::lit(config.discount));

    let n = S::lit(batch.len() as f64);
    let out_dim = eval.spec().output_dim();
    let mut acts = vec![Activations::new(eval.spec()); batch.len()];
    let mut out_grads = vec![S::zero(); batch.len() * out_dim];
    let mut loss = S::zero();
    for (((t, &q_target), a), g) in batch.iter().zip(&targets).zip(&mut acts).zip(out_grads.chunks_exact_mut(out_dim)) {
        eval.forward_cached(&t.obs, a);
        let err = a.output()[t.action] - q_target;
        loss += err * err;
        g[t.action] = S::lit(2.0) * err / n;
    }
    let mut grad = vec![S::zero(); eval.weights().len()];
    eval.accumulate_batch_gradient(&acts, &out_grads, &mut grad);
    optimizer.step(eval.weights_mut(), &grad);
    Some(loss / n)
}

/// `target <- eval`.
pub fn sync_target<S: Scalar>(eval: &Mlp<S>, target: &mut Mlp<S>) {
    target.set_weights(eval.weights().as_slice());
}

/// A UE's learner: evaluation and target networks, replay memory, optimizer
/// and a private RNG stream.
#[derive(Debug, Clone)]
pub struct DqnAgent<S> {
    eval: Mlp<S>,
    target: Mlp<S>,
    memory: ReplayMemory<S>,
    optimizer: Sgd<S>,
    config: TrainConfig,
    rng: ChaCha8Rng,
    steps: u64,
}

impl<S: Scalar> DqnAgent<S> {
    /// Weights are drawn from stream `stream` of `seed`; the same stream then
    /// drives exploration and minibatch sampling.
    pub fn new(spec: MlpSpec, config: TrainConfig, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let eval = Mlp::he_uniform(spec, &mut rng);
        Self {
            target: eval.clone(),
            memory: ReplayMemory::new(config.replay_capacity),
            optimizer: Sgd::new(S::lit(config.lr), S::lit(config.momentum)),
            eval,
            config,
            rng,
            steps: 0,
        }
    }

    pub fn eval_net(&self) -> &Mlp<S> {
        &self.eval
    }

    pub fn target_net(&self) -> &Mlp<S> {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory<S> {
        &self.memory
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn select_action(&mut self, obs: &[S], epsilon: f64) -> usize {
        select_action(&self.eval, obs, epsilon, &mut self.rng)
    }

    pub fn greedy_action(&self, obs: &[S]) -> usize {
        argmax(&self.eval.forward(obs))
    }

    /// Stores the transition, trains once if enough data is available, and
    /// refreshes the target network on period boundaries. Returns the
    /// pre-update loss when a gradient step ran.
    pub fn observe(&mut self, t: Transition<S>) -> Option<S> {
        self.memory.push(t);
        self.steps += 1;
        let loss = train_step(&self.memory, &mut self.eval, &self.target, &self.config, &mut self.optimizer, &mut self.rng);
        if self.steps % self.config.target_sync_period == 0 {
            sync_target(&self.eval, &mut self.target);
        }
        loss
    }

    pub fn sync_target(&mut self) {
        sync_target(&self.eval, &mut self.target);
    }

    /// Replaces both networks with `weights` (model broadcast).
    pub fn load_weights(&mut self, weights: &[S]) {
        self.eval.set_weights(weights);
        self.target.set_weights(weights);
        self.optimizer.reset();
    }
}
