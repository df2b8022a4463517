//! Dueling double deep Q-learning: dense networks, replay memory, target
//! networks and the training step.

mod learner;
mod network;
mod replay;
mod snapshot;

pub use learner::{td_targets, EpsilonSchedule, Learner, LearnerConfig};
pub use network::{argmax, Architecture, QNetwork};
pub use replay::{ReplayBuffer, Transition};
pub use snapshot::{WeightSnapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub(crate) use snapshot::Reader;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum D3qlError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("action {0} out of range")]
    ActionOutOfRange(usize),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("architectures differ")]
    ArchitectureMismatch,
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
    #[error("non-finite parameter")]
    NonFinite,
    #[error("cannot train on an empty replay")]
    EmptyReplay,
    #[error("requested {requested} samples from {available} entries")]
    InsufficientEntries { requested: usize, available: usize },
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}
