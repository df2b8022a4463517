use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, PolicyKind, RewardMode};
use crate::d3ql::{EpsilonSchedule, LearnerConfig};
use crate::exec::Execution;
use crate::mac_env::EnvConfig;
use crate::oracle::Objective;

use super::HarnessError;

/// Federated refinement of the shared classifier: every user holds a disjoint
/// block of the semantic clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FederationSchedule {
    pub users: usize,
    pub clusters: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub spread: f64,
    pub rounds: u64,
    pub local_steps: usize,
    /// Slots between rounds, stamped on each published version.
    pub round_interval: u64,
    pub learner: LearnerConfig,
}

impl Default for FederationSchedule {
    fn default() -> Self {
        Self {
            users: 2,
            clusters: 4,
            dim: 2,
            samples_per_class: 200,
            spread: 0.3,
            rounds: 10,
            local_steps: 100,
            round_interval: 100,
            learner: LearnerConfig {
                hidden: vec![16],
                gamma: 0.0,
                learning_rate: 2e-2,
                replay_capacity: 1_000,
                batch_size: 32,
                target_sync: 1,
                epsilon: EpsilonSchedule {
                    start: 1.0,
                    end: 0.05,
                    decay_steps: 300,
                },
            },
        }
    }
}

impl FederationSchedule {
    /// Clusters held by `user`: a contiguous block of the cluster ids.
    pub fn clusters_of(&self, user: usize) -> Vec<usize> {
        let per = self.clusters.div_ceil(self.users.max(1));
        (user * per..((user + 1) * per).min(self.clusters)).collect()
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.users == 0 || self.users > self.clusters {
            return Err(HarnessError::Config(
                "federation needs between 1 and `clusters` users".into(),
            ));
        }
        if self.clusters < 2 || self.clusters > 2 * self.dim {
            return Err(HarnessError::Config(
                "federation clusters must lie in 2..=2*dim".into(),
            ));
        }
        if !(self.spread.is_finite() && self.spread >= 0.0) || self.samples_per_class == 0 {
            return Err(HarnessError::Config(
                "federation needs a non-negative spread and samples".into(),
            ));
        }
        self.learner.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: EnvConfig,
    pub policies: Vec<PolicyKind>,
    #[serde(default)]
    pub agent: AgentConfig,
    pub seeds: Vec<u64>,
    /// Trailing slots averaged in the summary.
    #[serde(default = "default_final_window")]
    pub final_window: u64,
    #[serde(default)]
    pub objective: Objective,
    #[serde(default)]
    pub federation: Option<FederationSchedule>,
    #[serde(default)]
    pub kbmano_scenario: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub execution: Execution,
}

fn default_final_window() -> u64 {
    1_000
}

pub const BUILTIN_SCENARIOS: [&str; 3] = ["fig6a", "smoke", "federation"];

fn fig6a_env(horizon: u64) -> EnvConfig {
    EnvConfig {
        n_users: 4,
        n_channels: 1,
        n_semantics: 4,
        groups: vec![vec![0, 1], vec![2, 3]],
        p_share: 1.0,
        horizon,
        seed: 0,
    }
}

impl ExperimentConfig {
    /// Two sharing pairs on one channel, all three policies, five seeds.
    pub fn fig6a() -> Self {
        Self {
            name: "fig6a".into(),
            env: fig6a_env(20_000),
            policies: PolicyKind::ALL.to_vec(),
            agent: AgentConfig {
                reward_mode: RewardMode::Cell,
                ..AgentConfig::default()
            },
            seeds: vec![1, 2, 3, 4, 5],
            final_window: 1_000,
            objective: Objective::MaxTransmissions,
            federation: None,
            kbmano_scenario: None,
            out_dir: None,
            execution: Execution::default(),
        }
    }

    /// The fig6a cell at a few hundred slots with small networks.
    pub fn smoke() -> Self {
        let mut c = Self::fig6a();
        c.name = "smoke".into();
        c.env.horizon = 400;
        c.seeds = vec![1, 2];
        c.final_window = 100;
        c.agent.learner.hidden = vec![16, 16];
        c
    }

    /// Knowledge-base refinement only: no radio slots.
    pub fn federation() -> Self {
        let mut c = Self::fig6a();
        c.name = "federation".into();
        c.env.horizon = 0;
        c.seeds = vec![1];
        c.federation = Some(FederationSchedule::default());
        c
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "fig6a" => Some(Self::fig6a()),
            "smoke" => Some(Self::smoke()),
            "federation" => Some(Self::federation()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let c: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// A built-in scenario name or a TOML file. Relative scenario paths inside
    /// the file resolve against its directory.
    pub fn resolve(scenario: &str) -> Result<Self, HarnessError> {
        if let Some(c) = Self::builtin(scenario) {
            return Ok(c);
        }
        let path = Path::new(scenario);
        if !path.exists() {
            return Err(HarnessError::Config(format!(
                "`{scenario}` is neither a built-in scenario ({}) nor a file",
                BUILTIN_SCENARIOS.join(", ")
            )));
        }
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut c = Self::from_toml(&text)?;
        if let (Some(kb), Some(dir)) = (&c.kbmano_scenario, path.parent()) {
            if kb.is_relative() {
                c.kbmano_scenario = Some(dir.join(kb));
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be a nonempty file-name-safe string");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        let mut policies = self.policies.clone();
        policies.sort();
        policies.dedup();
        if policies.len() != self.policies.len() {
            return bad("policies must be distinct");
        }
        if self.policies.is_empty() && self.env.horizon > 0 {
            return bad("at least one policy is required");
        }
        self.env.validate()?;
        self.agent
            .learner
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(f) = &self.federation {
            f.validate()?;
        }
        Ok(())
    }
}
