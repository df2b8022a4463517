//! Experiment runner: radio-cell training runs against the exhaustive
//! optimum, group-size sweeps, federated refinement and orchestration replays.

mod config;
mod experiment;
mod sim;
mod sweep;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{ExperimentConfig, FederationSchedule, BUILTIN_SCENARIOS};
pub use experiment::{
    metrics_header, run_experiment, run_federation, ExperimentReport, FederationRow, RunSummary,
    FEDERATION_HEADER, SUMMARY_HEADER,
};
pub use sim::{simulate, SimError};
pub use sweep::{
    sweep_csv, sweep_group_size, sweep_groups, SweepConfig, SweepRow, CALIBRATED_P_SHARE,
    SWEEP_HEADER,
};

use crate::mano::{run_scenario, Event, ManoError, Scenario};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Env(#[from] crate::mac_env::EnvError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Oracle(#[from] crate::oracle::OracleError),
    #[error(transparent)]
    Kb(#[from] crate::semantic_kb::KbError),
    #[error(transparent)]
    Mano(#[from] ManoError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Parses and replays an orchestration scenario file.
pub fn run_kbmano_scenario(path: &Path) -> Result<Vec<Event>, HarnessError> {
    let scenario = Scenario::load(path)?;
    Ok(run_scenario(&scenario)?)
}
