use crate::agents::{record_for, reward, Agent, AgentConfig, AgentError, PolicyKind};
use crate::mac_env::{Env, EnvConfig, EnvError, SlotOutcome};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Runs one policy on every user of a fresh cell for the configured horizon,
/// handing each slot outcome to `on_slot`.
pub fn simulate<F>(
    env_config: &EnvConfig,
    policy: PolicyKind,
    agent_config: &AgentConfig,
    seed: u64,
    mut on_slot: F,
) -> Result<Env, SimError>
where
    F: FnMut(&SlotOutcome),
{
    let mut cfg = env_config.clone();
    cfg.seed = seed;
    let mut env = Env::new(cfg)?;
    let mut agents = (0..env.config().n_users)
        .map(|u| Agent::new(policy, u, env.config(), agent_config, seed))
        .collect::<Result<Vec<_>, _>>()?;
    while !env.is_done() {
        let slot = env.slot();
        let actions = agents
            .iter_mut()
            .map(Agent::act)
            .collect::<Result<Vec<_>, _>>()?;
        let outcome = env.step(&actions)?;
        for (u, agent) in agents.iter_mut().enumerate() {
            let r = reward(&outcome, u, policy, agent_config.reward_mode);
            agent.observe(slot, record_for(&outcome, u, actions[u]), r)?;
        }
        on_slot(&outcome);
    }
    Ok(env)
}
