//! Exhaustive per-slot optimum with full knowledge of semantics and groups.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};
use crate::mac_env::{semantics_for_slot, Action, EnvConfig, SemanticAssignment};

pub const MAX_USERS: usize = 12;
pub const MAX_CHANNELS: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {n_users} users, {n_channels} channels (limit {MAX_USERS}, {MAX_CHANNELS})")]
    InstanceTooLarge { n_users: usize, n_channels: usize },
    #[error("channel count must be positive")]
    NoChannels,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Successful transmissions in the slot.
    #[default]
    MaxTransmissions,
    /// Distinct `(group, semantic)` pairs delivered in the slot.
    MaxDistinctSemantics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleProblem {
    pub assignment: SemanticAssignment,
    pub groups: Vec<Vec<usize>>,
    pub n_channels: usize,
    pub objective: Objective,
}

/// Per-user move of a genie schedule; `None` is idle.
pub type Schedule = Vec<Option<Action>>;

impl OracleProblem {
    fn n_users(&self) -> usize {
        self.assignment.per_user_semantic.len()
    }

    fn check(&self) -> Result<(), OracleError> {
        if self.n_channels == 0 {
            return Err(OracleError::NoChannels);
        }
        if self.n_users() > MAX_USERS || self.n_channels > MAX_CHANNELS {
            return Err(OracleError::InstanceTooLarge {
                n_users: self.n_users(),
                n_channels: self.n_channels,
            });
        }
        Ok(())
    }

    fn group_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_users()];
        for (gi, g) in self.groups.iter().enumerate() {
            for &u in g {
                out[u] = gi;
            }
        }
        out
    }

    /// Objective value of a schedule under the collision rules.
    pub fn evaluate(&self, schedule: &[Option<Action>]) -> u32 {
        let mut per_channel = vec![0usize; self.n_channels];
        for a in schedule.iter().flatten().filter(|a| a.is_transmit()) {
            per_channel[a.channel] += 1;
        }
        let winners = schedule.iter().enumerate().filter_map(|(u, a)| match a {
            Some(a) if a.is_transmit() && per_channel[a.channel] == 1 => Some(u),
            _ => None,
        });
        match self.objective {
            Objective::MaxTransmissions => winners.count() as u32,
            Objective::MaxDistinctSemantics => {
                let group_of = self.group_of();
                winners
                    .map(|u| (group_of[u], self.assignment.per_user_semantic[u]))
                    .collect::<BTreeSet<_>>()
                    .len() as u32
            }
        }
    }
}

struct Search<'a> {
    problem: &'a OracleProblem,
    group_of: Vec<usize>,
    channel_used: Vec<bool>,
    delivered: Vec<(usize, usize)>,
    current: Schedule,
    value: u32,
    best: Option<(u32, Schedule)>,
}

impl Search<'_> {
    fn gain(&self, user: usize) -> u32 {
        match self.problem.objective {
            Objective::MaxTransmissions => 1,
            Objective::MaxDistinctSemantics => {
                let key = (
                    self.group_of[user],
                    self.problem.assignment.per_user_semantic[user],
                );
                (!self.delivered.contains(&key)) as u32
            }
        }
    }

    fn bound(&self, user: usize) -> u32 {
        let free = self.channel_used.iter().filter(|u| !**u).count();
        self.value + free.min(self.current.len() - user) as u32
    }

    // Visits collision-free idle/transmit schedules in lexicographic order and
    // keeps the first one attaining the best value.
    fn visit(&mut self, user: usize) {
        if let Some((best, _)) = &self.best {
            if self.bound(user) <= *best {
                return;
            }
        }
        if user == self.current.len() {
            self.best = Some((self.value, self.current.clone()));
            return;
        }
        self.current[user] = None;
        self.visit(user + 1);
        for c in 0..self.problem.n_channels {
            if self.channel_used[c] {
                continue;
            }
            let gain = self.gain(user);
            let key = (
                self.group_of[user],
                self.problem.assignment.per_user_semantic[user],
            );
            self.channel_used[c] = true;
            self.current[user] = Some(Action::transmit(c));
            self.value += gain;
            self.delivered.push(key);
            self.visit(user + 1);
            self.delivered.pop();
            self.value -= gain;
            self.current[user] = None;
            self.channel_used[c] = false;
        }
    }
}

/// Best objective value and the lexicographically smallest schedule reaching
/// it (idle < sense < transmit, then by channel).
///
/// Sensing never adds value and colliding transmitters deliver nothing, so
/// replacing either with idle keeps the value and lowers the schedule; the
/// search therefore only walks collision-free idle/transmit schedules.
pub fn optimal_slot(problem: &OracleProblem) -> Result<(u32, Schedule), OracleError> {
    problem.check()?;
    let n = problem.n_users();
    let mut search = Search {
        problem,
        group_of: problem.group_of(),
        channel_used: vec![false; problem.n_channels],
        delivered: Vec::with_capacity(n),
        current: vec![None; n],
        value: 0,
        best: None,
    };
    search.visit(0);
    Ok(search.best.expect("empty schedule is always feasible"))
}

/// Per-slot optimum over the cell's seeded semantic draws.
pub fn optimal_trace(
    config: &EnvConfig,
    horizon: u64,
    objective: Objective,
    exec: Execution,
) -> Result<Vec<u32>, OracleError> {
    if config.n_users > MAX_USERS || config.n_channels > MAX_CHANNELS {
        return Err(OracleError::InstanceTooLarge {
            n_users: config.n_users,
            n_channels: config.n_channels,
        });
    }
    const CHUNK: u64 = 512;
    let chunks: Vec<u64> = (0..horizon.div_ceil(CHUNK)).collect();
    let per_chunk = exec::try_map(exec, chunks, |c| {
        (c * CHUNK..((c + 1) * CHUNK).min(horizon))
            .map(|slot| {
                let problem = OracleProblem {
                    assignment: semantics_for_slot(config, slot),
                    groups: config.groups.clone(),
                    n_channels: config.n_channels,
                    objective,
                };
                optimal_slot(&problem).map(|(v, _)| v)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(per_chunk.into_iter().flatten().collect())
}

pub fn mean(values: &[u32]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().map(|&v| v as f64).sum::<f64>() / values.len() as f64
}
