//! Layered orchestration of knowledge-base training and distribution.

mod bank;
mod control;
mod distribution;
mod forecast;
mod placement;
mod scenario;
mod strategy;
mod topology;

use thiserror::Error;

pub use bank::{Layer, LayeredBanks, MemoryBank, ResourceState, Windows};
pub use control::{run_scenario, write_event_log, Controller, Event, EventKind, EVENT_LOG_HEADER};
pub use distribution::{
    schedule_distribution, target_is_stale, Decision, DeferReason, DistributionTarget,
};
pub use forecast::{forecast, pessimistic, ExpSmoothing, Forecaster};
pub use placement::{
    escalate, place_training, Escalation, EscalationEvent, Exclusions, Failure, Placement,
    ReassessEvent, DEFAULT_RETRIES,
};
pub use scenario::{Override, OverrideTarget, Scenario, ServiceSpec};
pub use strategy::{best_split, select_strategy, split_cost, LayerProfile, Strategy, TaskProfile};
pub use topology::{
    bottleneck, check_path, Feasibility, Link, LinkId, Node, NodeId, NodeKind, Topology,
};

#[derive(Debug, Error)]
pub enum ManoError {
    #[error("negative or non-finite capacity in sample at slot {0}")]
    NegativeCapacity(u64),
    #[error("memory bank windows must satisfy e2e >= domain >= resource >= 1, got {0:?}")]
    WindowOrder(Windows),
    #[error("out-of-order sample: slot {got} after {last}")]
    OutOfOrderSample { last: u64, got: u64 },
    #[error("{} memory bank is empty", .0.name())]
    EmptyBank(Layer),
    #[error("point of arrival `{0}` reaches no compute node")]
    Disconnected(String),
    #[error("unknown link {0}")]
    UnknownLink(usize),
    #[error("links {0:?} do not form a path")]
    BrokenPath(Vec<usize>),
    #[error("no feasible training strategy")]
    NoFeasibleStrategy,
    #[error("no feasible placement for {0} training")]
    NoFeasiblePlacement(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
