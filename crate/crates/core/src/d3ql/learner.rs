use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{argmax, Architecture, QNetwork};
use super::replay::{ReplayBuffer, Transition};
use super::D3qlError;

/// Linear exploration decay from `start` to `end` over `decay_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.02,
            decay_steps: 5_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn constant(eps: f64) -> Self {
        Self {
            start: eps,
            end: eps,
            decay_steps: 0,
        }
    }

    pub fn value(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        (self.start + (self.end - self.start) * frac).clamp(self.end.min(self.start), self.start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub hidden: Vec<usize>,
    pub gamma: f64,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync: u64,
    pub epsilon: EpsilonSchedule,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            gamma: 0.9,
            learning_rate: 1e-3,
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync: 100,
            epsilon: EpsilonSchedule::default(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), D3qlError> {
        let bad = |msg: &str| Err(D3qlError::InvalidConfig(msg.to_string()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if self.replay_capacity == 0 || self.batch_size == 0 {
            return bad("replay_capacity and batch_size must be positive");
        }
        if self.target_sync == 0 {
            return bad("target_sync must be positive");
        }
        let e = self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) || e.end > e.start {
            return bad("epsilon must satisfy 0 <= end <= start <= 1");
        }
        Ok(())
    }
}

/// Adaptive moment estimation over a flat parameter vector.
#[derive(Debug, Clone)]
struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(lr: f64, n: usize) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn step(&mut self, net: &mut QNetwork, grad: &[f64]) {
        self.t = self.t.saturating_add(1);
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        net.apply_flat(|i, w| {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            *w -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
        });
    }
}

/// Double-DQN regression targets: `r` for terminal transitions, otherwise
/// `r + gamma * Q_target(s', argmax_a Q_online(s', a))`.
pub fn td_targets(
    batch: &[&Transition],
    online: &QNetwork,
    target: &QNetwork,
    gamma: f64,
) -> Result<Vec<f64>, D3qlError> {
    batch
        .iter()
        .map(|t| {
            if t.terminal {
                return Ok(t.reward);
            }
            let best = argmax(&online.forward(&t.next_state)?);
            Ok(t.reward + gamma * target.forward(&t.next_state)?[best])
        })
        .collect()
}

/// Online and target networks, replay memory and optimizer state of one agent.
#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    online: QNetwork,
    target: QNetwork,
    optimizer: Adam,
    replay: ReplayBuffer,
    steps: u64,
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        actions: usize,
        config: LearnerConfig,
        rng: &mut R,
    ) -> Result<Self, D3qlError> {
        config.validate()?;
        let arch = Architecture::new(input, config.hidden.clone(), actions);
        let online = QNetwork::new(arch, rng)?;
        Ok(Self::with_network(online, config))
    }

    pub fn with_network(online: QNetwork, config: LearnerConfig) -> Self {
        let optimizer = Adam::new(config.learning_rate, online.architecture().param_count());
        Self {
            target: online.clone(),
            replay: ReplayBuffer::new(config.replay_capacity),
            online,
            optimizer,
            config,
            steps: 0,
        }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn online(&self) -> &QNetwork {
        &self.online
    }

    pub fn target(&self) -> &QNetwork {
        &self.target
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    /// Gradient steps taken so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn epsilon_at(&self, t: u64) -> f64 {
        self.config.epsilon.value(t)
    }

    pub fn sync_target(&mut self) {
        self.target = self.online.clone();
    }

    /// Replaces both networks, e.g. with an aggregated global model.
    /// Optimizer moments are kept.
    pub fn load_network(&mut self, net: QNetwork) -> Result<(), D3qlError> {
        if net.architecture() != self.online.architecture() {
            return Err(D3qlError::ArchitectureMismatch);
        }
        self.online = net;
        self.sync_target();
        Ok(())
    }

    pub fn greedy_action(&self, state: &[f64]) -> Result<usize, D3qlError> {
        Ok(argmax(&self.online.forward(state)?))
    }

    pub fn remember(&mut self, transition: Transition) {
        self.replay.push(transition);
    }

    /// One gradient step on the given batch. Returns the pre-update loss.
    pub fn train_step(&mut self, batch: &[&Transition]) -> Result<f64, D3qlError> {
        if batch.is_empty() {
            return Err(D3qlError::EmptyReplay);
        }
        let targets = td_targets(batch, &self.online, &self.target, self.config.gamma)?;
        let states: Vec<&[f64]> = batch.iter().map(|t| t.state.as_slice()).collect();
        let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
        let (loss, grad) = self.online.loss_gradient(&states, &actions, &targets)?;
        self.optimizer.step(&mut self.online, &grad);
        self.steps += 1;
        if self.steps % self.config.target_sync == 0 {
            self.sync_target();
        }
        Ok(loss)
    }

    /// Samples a batch from replay and trains on it. Uses a smaller batch
    /// while replay holds fewer than `batch_size` entries.
    pub fn train<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64, D3qlError> {
        if self.replay.is_empty() {
            return Err(D3qlError::EmptyReplay);
        }
        let size = self.config.batch_size.min(self.replay.len());
        let idx = self.replay.sample_indices(size, rng)?;
        let batch: Vec<Transition> = idx.iter().map(|&i| self.replay.get(i).clone()).collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        self.train_step(&refs)
    }
}
