//! Time-slotted multi-channel uplink cell with group-correlated semantic
//! traffic, collision resolution and assisted-throughput accounting.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("expected {expected} actions, got {got}")]
    ActionCount { expected: usize, got: usize },
    #[error("user {user} addressed channel {channel} but the cell has {n_channels}")]
    ChannelOutOfRange {
        user: usize,
        channel: usize,
        n_channels: usize,
    },
    #[error("horizon of {0} slots exceeded")]
    HorizonExceeded(u64),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> EnvError {
    EnvError::InvalidConfig {
        field,
        reason: reason.into(),
    }
}

/// Radio cell parameters. Users are indexed from 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub n_users: usize,
    pub n_channels: usize,
    pub n_semantics: usize,
    /// Partition of `0..n_users` into sharing groups.
    pub groups: Vec<Vec<usize>>,
    /// Probability that a member carries its group's slot semantic.
    pub p_share: f64,
    pub horizon: u64,
    #[serde(default)]
    pub seed: u64,
}

impl EnvConfig {
    /// Consecutive users packed into groups of `group_size`; the last group
    /// takes the remainder.
    pub fn contiguous_groups(n_users: usize, group_size: usize) -> Vec<Vec<usize>> {
        let size = group_size.max(1);
        (0..n_users)
            .collect::<Vec<_>>()
            .chunks(size)
            .map(<[usize]>::to_vec)
            .collect()
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.n_users == 0 {
            return Err(invalid("n_users", "must be at least 1"));
        }
        if self.n_channels == 0 {
            return Err(invalid("n_channels", "must be at least 1"));
        }
        if self.n_semantics < 2 {
            return Err(invalid("n_semantics", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.p_share) {
            return Err(invalid("p_share", "must lie in [0, 1]"));
        }
        let mut seen = vec![false; self.n_users];
        for g in &self.groups {
            if g.is_empty() {
                return Err(invalid("groups", "empty group"));
            }
            for &u in g {
                if u >= self.n_users {
                    return Err(invalid("groups", format!("user {u} out of range")));
                }
                if std::mem::replace(&mut seen[u], true) {
                    return Err(invalid("groups", format!("user {u} listed twice")));
                }
            }
        }
        if let Some(u) = seen.iter().position(|s| !s) {
            return Err(invalid("groups", format!("user {u} belongs to no group")));
        }
        Ok(())
    }

    /// Group index of every user.
    pub fn group_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_users];
        for (gi, g) in self.groups.iter().enumerate() {
            for &u in g {
                out[u] = gi;
            }
        }
        out
    }

    pub fn max_group_size(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(1)
    }

    pub fn n_actions(&self) -> usize {
        2 * self.n_channels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Sense,
    Transmit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub channel: usize,
}

impl Action {
    pub fn sense(channel: usize) -> Self {
        Self {
            kind: ActionKind::Sense,
            channel,
        }
    }

    pub fn transmit(channel: usize) -> Self {
        Self {
            kind: ActionKind::Transmit,
            channel,
        }
    }

    /// Dense index: sensing actions `0..C`, then transmissions `C..2C`.
    pub fn index(&self, n_channels: usize) -> usize {
        match self.kind {
            ActionKind::Sense => self.channel,
            ActionKind::Transmit => n_channels + self.channel,
        }
    }

    pub fn from_index(index: usize, n_channels: usize) -> Self {
        if index < n_channels {
            Self::sense(index)
        } else {
            Self::transmit(index - n_channels)
        }
    }

    pub fn is_transmit(&self) -> bool {
        self.kind == ActionKind::Transmit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observation {
    Busy,
    Idle,
    Success,
    Collision,
    /// Placeholder before the first slot.
    None,
}

impl Observation {
    pub const COUNT: usize = 5;

    pub fn index(&self) -> usize {
        match self {
            Observation::Busy => 0,
            Observation::Idle => 1,
            Observation::Success => 2,
            Observation::Collision => 3,
            Observation::None => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticAssignment {
    pub per_user_semantic: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot: u64,
    pub per_user_observation: Vec<Observation>,
    pub per_user_success: Vec<bool>,
    pub per_user_assisted: Vec<u32>,
    /// `(group, semantic)` pairs delivered this slot.
    pub delivered_semantics: BTreeSet<(usize, usize)>,
    pub slot_sum_throughput: u32,
}

/// Semantics carried by each user in `slot`; a pure function of `(config, slot)`.
pub fn semantics_for_slot(config: &EnvConfig, slot: u64) -> SemanticAssignment {
    let mut r = rng::stream(config.seed, rng::TRAFFIC, slot);
    let k = config.n_semantics;
    let mut per_user_semantic = vec![0; config.n_users];
    for group in &config.groups {
        let shared = r.gen_range(0..k);
        for &u in group {
            per_user_semantic[u] = if r.gen::<f64>() < config.p_share {
                shared
            } else {
                r.gen_range(0..k)
            };
        }
    }
    SemanticAssignment { per_user_semantic }
}

/// Assisted count per user. A successful user is credited with the group
/// mates carrying its semantic, unless an earlier-indexed successful user
/// already delivered that `(group, semantic)` this slot.
pub fn compute_assists(
    assignment: &SemanticAssignment,
    successes: &[bool],
    groups: &[Vec<usize>],
) -> Vec<u32> {
    let n = successes.len();
    let mut group_of = vec![usize::MAX; n];
    for (gi, g) in groups.iter().enumerate() {
        for &u in g {
            group_of[u] = gi;
        }
    }
    let sem = &assignment.per_user_semantic;
    let mut credited = BTreeSet::new();
    let mut assisted = vec![0; n];
    for u in (0..n).filter(|&u| successes[u]) {
        let g = group_of[u];
        if !credited.insert((g, sem[u])) {
            continue;
        }
        assisted[u] = groups[g]
            .iter()
            .filter(|&&v| v != u && sem[v] == sem[u])
            .count() as u32;
    }
    assisted
}

/// Resolves one slot of channel access: sole transmitters succeed, shared
/// channels collide, sensing reports whether anyone transmitted.
pub fn resolve_access(actions: &[Action], n_channels: usize) -> (Vec<Observation>, Vec<bool>) {
    let mut transmitters = vec![0usize; n_channels];
    for a in actions.iter().filter(|a| a.is_transmit()) {
        transmitters[a.channel] += 1;
    }
    let mut obs = Vec::with_capacity(actions.len());
    let mut success = Vec::with_capacity(actions.len());
    for a in actions {
        let k = transmitters[a.channel];
        let (o, s) = match a.kind {
            ActionKind::Transmit if k == 1 => (Observation::Success, true),
            ActionKind::Transmit => (Observation::Collision, false),
            ActionKind::Sense if k > 0 => (Observation::Busy, false),
            ActionKind::Sense => (Observation::Idle, false),
        };
        obs.push(o);
        success.push(s);
    }
    (obs, success)
}

/// Cumulative counters of a running environment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnvMetrics {
    pub slot_sum_throughput: Vec<u32>,
    pub per_user_throughput: Vec<u64>,
    pub per_user_assisted: Vec<u64>,
}

impl EnvMetrics {
    /// Mean over users of `assisted / max(total, 1)`.
    pub fn efficiency_ratio(&self) -> f64 {
        efficiency_ratio(&self.per_user_throughput, &self.per_user_assisted)
    }

    /// Total assisted semantics per successful transmission.
    pub fn pooled_efficiency_ratio(&self) -> f64 {
        pooled_efficiency_ratio(&self.per_user_throughput, &self.per_user_assisted)
    }
}

pub fn efficiency_ratio(throughput: &[u64], assisted: &[u64]) -> f64 {
    if throughput.is_empty() {
        return 0.0;
    }
    let sum: f64 = throughput
        .iter()
        .zip(assisted)
        .map(|(&t, &a)| a as f64 / t.max(1) as f64)
        .sum();
    sum / throughput.len() as f64
}

pub fn pooled_efficiency_ratio(throughput: &[u64], assisted: &[u64]) -> f64 {
    let t: u64 = throughput.iter().sum();
    let a: u64 = assisted.iter().sum();
    a as f64 / t.max(1) as f64
}

#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    slot: u64,
    current: SemanticAssignment,
    metrics: EnvMetrics,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let current = semantics_for_slot(&config, 0);
        let metrics = EnvMetrics {
            slot_sum_throughput: Vec::new(),
            per_user_throughput: vec![0; config.n_users],
            per_user_assisted: vec![0; config.n_users],
        };
        Ok(Self {
            config,
            slot: 0,
            current,
            metrics,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.config.horizon
    }

    /// Semantics carried in the current slot.
    pub fn draw_semantics(&self) -> &SemanticAssignment {
        &self.current
    }

    pub fn step(&mut self, actions: &[Action]) -> Result<SlotOutcome, EnvError> {
        if self.is_done() {
            return Err(EnvError::HorizonExceeded(self.config.horizon));
        }
        let cfg = &self.config;
        if actions.len() != cfg.n_users {
            return Err(EnvError::ActionCount {
                expected: cfg.n_users,
                got: actions.len(),
            });
        }
        if let Some((user, a)) = actions
            .iter()
            .enumerate()
            .find(|(_, a)| a.channel >= cfg.n_channels)
        {
            return Err(EnvError::ChannelOutOfRange {
                user,
                channel: a.channel,
                n_channels: cfg.n_channels,
            });
        }
        let (per_user_observation, per_user_success) = resolve_access(actions, cfg.n_channels);
        let per_user_assisted = compute_assists(&self.current, &per_user_success, &cfg.groups);
        let group_of = cfg.group_of();
        let delivered_semantics = per_user_success
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(u, _)| (group_of[u], self.current.per_user_semantic[u]))
            .collect();
        let slot_sum_throughput = per_user_success.iter().filter(|&&s| s).count() as u32;

        for u in 0..cfg.n_users {
            self.metrics.per_user_throughput[u] += per_user_success[u] as u64;
            self.metrics.per_user_assisted[u] += per_user_assisted[u] as u64;
        }
        self.metrics.slot_sum_throughput.push(slot_sum_throughput);

        let outcome = SlotOutcome {
            slot: self.slot,
            per_user_observation,
            per_user_success,
            per_user_assisted,
            delivered_semantics,
            slot_sum_throughput,
        };
        self.slot += 1;
        self.current = semantics_for_slot(&self.config, self.slot);
        Ok(outcome)
    }

    pub fn metrics(&self) -> &EnvMetrics {
        &self.metrics
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n_users: usize, n_channels: usize, groups: Vec<Vec<usize>>) -> EnvConfig {
        EnvConfig {
            n_users,
            n_channels,
            n_semantics: 4,
            groups,
            p_share: 1.0,
            horizon: 100,
            seed: 7,
        }
    }

    #[test]
    fn accepts_two_groups_of_two() {
        assert!(Env::new(cfg(4, 1, vec![vec![0, 1], vec![2, 3]])).is_ok());
        assert!(Env::new(cfg(1, 1, vec![vec![0]])).is_ok());
    }

    #[test]
    fn rejects_non_partition() {
        let err = Env::new(cfg(2, 1, vec![vec![0], vec![0, 1]])).unwrap_err();
        assert!(matches!(err, EnvError::InvalidConfig { field: "groups", .. }));
        let err = Env::new(cfg(2, 1, vec![vec![0], vec![]])).unwrap_err();
        assert!(matches!(err, EnvError::InvalidConfig { field: "groups", .. }));
        let err = Env::new(cfg(2, 1, vec![vec![0]])).unwrap_err();
        assert!(matches!(err, EnvError::InvalidConfig { field: "groups", .. }));
        let mut c = cfg(1, 1, vec![vec![0]]);
        c.n_semantics = 1;
        assert!(matches!(
            Env::new(c).unwrap_err(),
            EnvError::InvalidConfig { field: "n_semantics", .. }
        ));
    }

    #[test]
    fn collision_and_success() {
        let mut env = Env::new(cfg(2, 1, vec![vec![0], vec![1]])).unwrap();
        let out = env.step(&[Action::transmit(0), Action::transmit(0)]).unwrap();
        assert_eq!(out.per_user_observation, vec![Observation::Collision; 2]);
        assert_eq!(out.slot_sum_throughput, 0);

        let mut env = Env::new(cfg(1, 1, vec![vec![0]])).unwrap();
        let out = env.step(&[Action::transmit(0)]).unwrap();
        assert_eq!(out.per_user_observation, vec![Observation::Success]);
        assert_eq!(out.slot_sum_throughput, 1);
    }

    #[test]
    fn sensing_reports_busy_and_idle() {
        let mut env = Env::new(cfg(3, 2, vec![vec![0], vec![1], vec![2]])).unwrap();
        let out = env
            .step(&[Action::transmit(0), Action::sense(0), Action::sense(1)])
            .unwrap();
        assert_eq!(
            out.per_user_observation,
            vec![Observation::Success, Observation::Busy, Observation::Idle]
        );
    }

    #[test]
    fn horizon_and_channel_errors() {
        let mut c = cfg(1, 1, vec![vec![0]]);
        c.horizon = 1;
        let mut env = Env::new(c).unwrap();
        assert!(matches!(
            env.step(&[Action::transmit(3)]),
            Err(EnvError::ChannelOutOfRange { channel: 3, .. })
        ));
        env.step(&[Action::sense(0)]).unwrap();
        assert_eq!(env.step(&[Action::sense(0)]), Err(EnvError::HorizonExceeded(1)));
    }

    #[test]
    fn assists_full_group() {
        let a = SemanticAssignment {
            per_user_semantic: vec![7, 7, 7],
        };
        let groups = vec![vec![0, 1, 2]];
        assert_eq!(compute_assists(&a, &[true, false, false], &groups), vec![2, 0, 0]);
    }

    #[test]
    fn assists_singleton_group() {
        let a = SemanticAssignment {
            per_user_semantic: vec![1, 1],
        };
        let groups = vec![vec![0], vec![1]];
        assert_eq!(compute_assists(&a, &[true, true], &groups), vec![0, 0]);
    }

    #[test]
    fn assists_are_not_double_counted() {
        let a = SemanticAssignment {
            per_user_semantic: vec![3, 3],
        };
        let groups = vec![vec![0, 1]];
        assert_eq!(compute_assists(&a, &[true, true], &groups), vec![1, 0]);
    }

    #[test]
    fn full_sharing_gives_identical_semantics() {
        let c = cfg(4, 1, vec![vec![0, 1], vec![2, 3]]);
        for slot in 0..50 {
            let s = semantics_for_slot(&c, slot).per_user_semantic;
            assert_eq!(s[0], s[1]);
            assert_eq!(s[2], s[3]);
        }
    }

    #[test]
    fn ratio_zero_without_group_mates() {
        let mut env = Env::new(cfg(1, 1, vec![vec![0]])).unwrap();
        for _ in 0..100 {
            env.step(&[Action::transmit(0)]).unwrap();
        }
        assert_eq!(env.metrics().efficiency_ratio(), 0.0);
    }

    #[test]
    fn ratio_of_constant_assists() {
        assert_eq!(efficiency_ratio(&[10], &[20]), 2.0);
        assert_eq!(pooled_efficiency_ratio(&[10, 0], &[20, 0]), 2.0);
        assert_eq!(efficiency_ratio(&[10, 0], &[20, 0]), 1.0);
    }
}
