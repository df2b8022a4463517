//! Per-user medium-access policies and their history featurization.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::d3ql::{D3qlError, Learner, LearnerConfig, Transition};
use crate::mac_env::{Action, EnvConfig, Observation, SlotOutcome};
use crate::rng;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("expected record for slot {expected}, got slot {got}")]
    OutOfOrderSlot { expected: u64, got: u64 },
    #[error(transparent)]
    Learner(#[from] D3qlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "SAMA-D3QL")]
    SamaD3ql,
    #[serde(rename = "MA-D3QL")]
    MaD3ql,
    #[serde(rename = "RND")]
    Rnd,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::SamaD3ql, PolicyKind::MaD3ql, PolicyKind::Rnd];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::SamaD3ql => "SAMA-D3QL",
            PolicyKind::MaD3ql => "MA-D3QL",
            PolicyKind::Rnd => "RND",
        }
    }

    pub fn learns(&self) -> bool {
        !matches!(self, PolicyKind::Rnd)
    }

    pub fn semantic_aware(&self) -> bool {
        matches!(self, PolicyKind::SamaD3ql)
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "SAMA-D3QL" | "SAMA" => Ok(PolicyKind::SamaD3ql),
            "MA-D3QL" | "MA" => Ok(PolicyKind::MaD3ql),
            "RND" | "RANDOM" => Ok(PolicyKind::Rnd),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the semantic-aware reward weights throughput by assisted semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Own success weighted by the semantics it co-delivered:
    /// `success(u) * (1 + assisted(u))`.
    #[default]
    Own,
    /// Cell-wide weighted average, fed back by the base station:
    /// `mean_v success(v) * (1 + assisted(v))`.
    Cell,
}

/// Reward of `user` after `outcome`. The semantic-blind policy only ever
/// sees its own success.
pub fn reward(outcome: &SlotOutcome, user: usize, policy: PolicyKind, mode: RewardMode) -> f64 {
    let weighted = |v: usize| {
        if outcome.per_user_success[v] {
            1.0 + outcome.per_user_assisted[v] as f64
        } else {
            0.0
        }
    };
    match policy {
        PolicyKind::SamaD3ql => match mode {
            RewardMode::Own => weighted(user),
            RewardMode::Cell => {
                let n = outcome.per_user_success.len();
                (0..n).map(weighted).sum::<f64>() / n as f64
            }
        },
        PolicyKind::MaD3ql => outcome.per_user_success[user] as u8 as f64,
        PolicyKind::Rnd => 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryRecord {
    pub action: Action,
    pub observation: Observation,
    pub assisted: u32,
}

/// Layout of the fixed-length history encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateEncoding {
    pub history: usize,
    pub n_channels: usize,
    /// Divisor for assisted counts: largest group size minus one, at least 1.
    pub assist_scale: f64,
    pub include_assisted: bool,
}

impl StateEncoding {
    pub fn new(history: usize, env: &EnvConfig, policy: PolicyKind) -> Self {
        Self {
            history,
            n_channels: env.n_channels,
            assist_scale: (env.max_group_size().saturating_sub(1)).max(1) as f64,
            include_assisted: policy.semantic_aware(),
        }
    }

    pub fn record_width(&self) -> usize {
        2 * self.n_channels + Observation::COUNT + 1
    }

    pub fn dim(&self) -> usize {
        self.history * self.record_width()
    }

    /// Encodes up to `history` records, oldest first. Missing older records
    /// leave their block zeroed.
    pub fn encode<'a, I>(&self, window: I) -> Vec<f64>
    where
        I: IntoIterator<Item = &'a HistoryRecord>,
        I::IntoIter: ExactSizeIterator,
    {
        let w = self.record_width();
        let mut out = vec![0.0; self.dim()];
        let iter = window.into_iter();
        let len = iter.len();
        let skip = len.saturating_sub(self.history);
        let pad = self.history.saturating_sub(len);
        for (i, rec) in iter.skip(skip).enumerate() {
            let block = &mut out[(pad + i) * w..(pad + i + 1) * w];
            block[rec.action.index(self.n_channels)] = 1.0;
            block[2 * self.n_channels + rec.observation.index()] = 1.0;
            if self.include_assisted {
                block[w - 1] = rec.assisted as f64 / self.assist_scale;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub history: usize,
    pub learner: LearnerConfig,
    /// Train every this many observed slots; 0 disables learning.
    pub train_every: u64,
    /// Replay entries required before the first gradient step.
    pub warmup: usize,
    pub reward_mode: RewardMode,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            history: 8,
            learner: LearnerConfig::default(),
            train_every: 1,
            warmup: 32,
            reward_mode: RewardMode::Own,
        }
    }
}

/// Epsilon-greedy selection; never mutates the learner.
pub fn select_action<R: Rng + ?Sized>(
    learner: Option<&Learner>,
    state: &[f64],
    epsilon: f64,
    n_actions: usize,
    rng: &mut R,
) -> Result<usize, D3qlError> {
    match learner {
        None => Ok(rng.gen_range(0..n_actions)),
        Some(l) => {
            if rng.gen::<f64>() < epsilon {
                Ok(rng.gen_range(0..n_actions))
            } else {
                l.greedy_action(state)
            }
        }
    }
}

/// One user's access policy.
#[derive(Debug, Clone)]
pub struct Agent {
    policy: PolicyKind,
    encoding: StateEncoding,
    n_actions: usize,
    window: VecDeque<HistoryRecord>,
    learner: Option<Learner>,
    rng: ChaCha8Rng,
    slots: u64,
    train_every: u64,
    warmup: usize,
    last: Option<(Vec<f64>, usize)>,
}

impl Agent {
    /// Agent for `user`; its random stream depends on `(seed, user)` only, so
    /// different policies start from identical networks and draws.
    pub fn new(
        policy: PolicyKind,
        user: usize,
        env: &EnvConfig,
        config: &AgentConfig,
        seed: u64,
    ) -> Result<Self, AgentError> {
        let encoding = StateEncoding::new(config.history, env, policy);
        let n_actions = env.n_actions();
        let mut rng = rng::stream(seed, rng::AGENT, user as u64);
        let learner = if policy.learns() {
            Some(Learner::new(
                encoding.dim(),
                n_actions,
                config.learner.clone(),
                &mut rng,
            )?)
        } else {
            None
        };
        Ok(Self {
            policy,
            encoding,
            n_actions,
            window: VecDeque::with_capacity(config.history + 1),
            learner,
            rng,
            slots: 0,
            train_every: config.train_every,
            warmup: config.warmup.max(1),
            last: None,
        })
    }

    pub fn policy(&self) -> PolicyKind {
        self.policy
    }

    pub fn learner(&self) -> Option<&Learner> {
        self.learner.as_ref()
    }

    pub fn window(&self) -> impl Iterator<Item = &HistoryRecord> {
        self.window.iter()
    }

    pub fn slots_observed(&self) -> u64 {
        self.slots
    }

    pub fn epsilon(&self) -> f64 {
        self.learner
            .as_ref()
            .map_or(1.0, |l| l.epsilon_at(self.slots))
    }

    pub fn state(&self) -> Vec<f64> {
        self.encoding.encode(self.window.iter())
    }

    pub fn act(&mut self) -> Result<Action, AgentError> {
        let state = self.state();
        let eps = self.epsilon();
        let idx = select_action(
            self.learner.as_ref(),
            &state,
            eps,
            self.n_actions,
            &mut self.rng,
        )?;
        self.last = Some((state, idx));
        Ok(Action::from_index(idx, self.encoding.n_channels))
    }

    /// Records the outcome of `slot`, stores the transition and trains on cadence.
    pub fn observe(
        &mut self,
        slot: u64,
        record: HistoryRecord,
        reward: f64,
    ) -> Result<Option<f64>, AgentError> {
        if slot != self.slots {
            return Err(AgentError::OutOfOrderSlot {
                expected: self.slots,
                got: slot,
            });
        }
        self.window.push_back(record);
        if self.window.len() > self.encoding.history {
            self.window.pop_front();
        }
        self.slots += 1;
        let Some(learner) = self.learner.as_mut() else {
            return Ok(None);
        };
        let (state, action) = match self.last.take() {
            Some(prev) => prev,
            None => (
                self.encoding.encode(std::iter::empty()),
                record.action.index(self.encoding.n_channels),
            ),
        };
        let next_state = self.encoding.encode(self.window.iter());
        learner.remember(Transition {
            state,
            action,
            reward,
            next_state,
            terminal: false,
        });
        if self.train_every > 0
            && self.slots % self.train_every == 0
            && learner.replay().len() >= self.warmup
        {
            return Ok(Some(learner.train(&mut self.rng)?));
        }
        Ok(None)
    }
}

/// Builds the history record a user receives after `outcome`.
pub fn record_for(outcome: &SlotOutcome, user: usize, action: Action) -> HistoryRecord {
    HistoryRecord {
        action,
        observation: outcome.per_user_observation[user],
        assisted: outcome.per_user_assisted[user],
    }
}
