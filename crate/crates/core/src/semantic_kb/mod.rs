//! Knowledge-base lifecycle: a semantic classifier refined by federated
//! averaging, versioned KB files, and staleness-driven redistribution.

mod dataset;
mod federation;
mod kb;
mod staleness;

pub use dataset::{cluster_mean, gen_classes, gen_dataset, DataItem, MEAN_OFFSET};
pub use federation::{
    accuracy, fed_average, local_train, DistributionEvent, FedUser, Federation, FederationRound,
    RoundConfig,
};
pub use kb::{classify, KnowledgeBase};
pub use staleness::{staleness_trigger, Delivery, DriftModel};

use thiserror::Error;

use crate::d3ql::D3qlError;

#[derive(Debug, Error)]
pub enum KbError {
    #[error("federation round needs at least one participant")]
    NoParticipants,
    #[error("unknown user {0}")]
    UnknownUser(usize),
    #[error("knowledge base version {version} does not match the declared classifier architecture")]
    ArchitectureMismatch { version: u64 },
    #[error(transparent)]
    Learner(#[from] D3qlError),
}
