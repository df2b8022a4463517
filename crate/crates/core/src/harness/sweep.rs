use std::fmt::Write as _;

use crate::agents::{AgentConfig, PolicyKind, RewardMode};
use crate::exec::{self, Execution};
use crate::mac_env::{efficiency_ratio, EnvConfig};

use super::{simulate, HarnessError};

/// Share probability used by the group-size sweep. With four semantics it
/// gives two members a common semantic with probability
/// `p^2 + (1 - p^2) / 4 = 0.4375`.
pub const CALIBRATED_P_SHARE: f64 = 0.5;

pub const SWEEP_HEADER: &str = "n_users,group_size,seeds,sharing_ratio,cell_ratio,pooled_ratio";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n_channels: usize,
    pub n_semantics: usize,
    pub p_share: f64,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub policy: PolicyKind,
    pub agent: AgentConfig,
    pub execution: Execution,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let mut agent = AgentConfig {
            reward_mode: RewardMode::Cell,
            ..AgentConfig::default()
        };
        agent.learner.hidden = vec![32, 32];
        Self {
            n_channels: 1,
            n_semantics: 4,
            p_share: CALIBRATED_P_SHARE,
            horizon: 3_000,
            seeds: vec![1, 2],
            policy: PolicyKind::SamaD3ql,
            agent,
            execution: Execution::default(),
        }
    }
}

/// Seed-averaged efficiency ratios of one cell layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n_users: usize,
    pub group_size: usize,
    pub seeds: usize,
    /// Mean over members of the sharing group of `assisted / max(total, 1)`.
    pub sharing_ratio: f64,
    /// The same mean taken over every user of the cell.
    pub cell_ratio: f64,
    pub pooled_ratio: f64,
}

/// Users `0..group_size` share semantics; every other user is on its own.
pub fn sweep_groups(n_users: usize, group_size: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![(0..group_size).collect::<Vec<_>>()];
    groups.extend((group_size..n_users).map(|u| vec![u]));
    groups
}

/// Efficiency ratios for every (n_users, group size) pair.
pub fn sweep_group_size(
    config: &SweepConfig,
    group_sizes: &[usize],
    users: &[usize],
) -> Result<Vec<SweepRow>, HarnessError> {
    if config.seeds.is_empty() {
        return Err(HarnessError::Config("at least one seed is required".into()));
    }
    let mut jobs = Vec::new();
    for &n in users {
        for &g in group_sizes {
            if g == 0 || g > n {
                return Err(HarnessError::Config(format!(
                    "group size {g} must lie in 1..={n} for {n} users"
                )));
            }
            for &seed in &config.seeds {
                jobs.push((n, g, seed));
            }
        }
    }
    let per_run = exec::try_map(config.execution, jobs, |(n, g, seed)| {
        let env = EnvConfig {
            n_users: n,
            n_channels: config.n_channels,
            n_semantics: config.n_semantics,
            groups: sweep_groups(n, g),
            p_share: config.p_share,
            horizon: config.horizon,
            seed,
        };
        let end = simulate(&env, config.policy, &config.agent, seed, |_| {})?;
        let m = end.metrics();
        Ok::<_, HarnessError>((
            efficiency_ratio(&m.per_user_throughput[..g], &m.per_user_assisted[..g]),
            m.efficiency_ratio(),
            m.pooled_efficiency_ratio(),
        ))
    })?;
    let s = config.seeds.len();
    let mut rows = Vec::new();
    let mut runs = per_run.chunks(s);
    for &n in users {
        for &g in group_sizes {
            let chunk = runs.next().expect("one chunk per layout");
            let avg = |f: fn(&(f64, f64, f64)) -> f64| chunk.iter().map(f).sum::<f64>() / s as f64;
            rows.push(SweepRow {
                n_users: n,
                group_size: g,
                seeds: s,
                sharing_ratio: avg(|r| r.0),
                cell_ratio: avg(|r| r.1),
                pooled_ratio: avg(|r| r.2),
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.n_users, r.group_size, r.seeds, r.sharing_ratio, r.cell_ratio, r.pooled_ratio
        )
        .unwrap();
    }
    out
}
