use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::semantic_kb::{Delivery, DriftModel, KnowledgeBase};

use super::bank::ResourceState;
use super::topology::{check_path, Feasibility, NodeId, Topology};
use super::ManoError;

/// A user group, service instance or point of arrival holding a KB copy.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTarget {
    pub name: String,
    pub node: NodeId,
    pub drift: DriftModel,
    /// Accuracy below which the deployed copy must be refreshed.
    pub threshold: f64,
    pub kb_size: f64,
    pub deadline: u64,
    pub deployed_version: u64,
    pub deployed_trained_at: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeferReason {
    Fresh,
    UpToDate,
    Bandwidth,
    Latency,
    NoPath,
}

impl DeferReason {
    pub fn label(&self) -> &'static str {
        match self {
            DeferReason::Fresh => "fresh",
            DeferReason::UpToDate => "up_to_date",
            DeferReason::Bandwidth => "bandwidth",
            DeferReason::Latency => "latency",
            DeferReason::NoPath => "no_path",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Deliver,
    Defer(DeferReason),
}

impl Decision {
    pub fn delivery(&self) -> Delivery {
        match self {
            Decision::Deliver => Delivery::Deliver,
            Decision::Defer(_) => Delivery::Defer,
        }
    }
}

/// Whether the copy held by `target` has decayed below its threshold.
pub fn target_is_stale(target: &DistributionTarget, now: u64) -> bool {
    target.drift.estimated_accuracy(target.deployed_trained_at, now) < target.threshold
}

/// Per-target decision for pushing `kb` from `source`. Delivery requires a
/// stale deployed copy, a newer version, and a feasible lowest-latency path
/// for the KB size. Targets are judged independently.
pub fn schedule_distribution(
    kb: &KnowledgeBase,
    targets: &[DistributionTarget],
    topology: &Topology,
    state: &ResourceState,
    source: NodeId,
    now: u64,
) -> Result<Vec<Decision>, ManoError> {
    let routes = topology.shortest_paths(
        source,
        0.0,
        &state.link_bandwidth,
        &state.link_latency,
        &BTreeSet::new(),
    );
    targets
        .iter()
        .map(|t| {
            if !target_is_stale(t, now) {
                return Ok(Decision::Defer(DeferReason::Fresh));
            }
            if kb.version <= t.deployed_version {
                return Ok(Decision::Defer(DeferReason::UpToDate));
            }
            let Some((_, path)) = &routes[t.node] else {
                return Ok(Decision::Defer(DeferReason::NoPath));
            };
            Ok(match check_path(topology, state, path, t.kb_size, t.deadline)? {
                Feasibility::Ok => Decision::Deliver,
                Feasibility::InfeasibleBandwidth => Decision::Defer(DeferReason::Bandwidth),
                Feasibility::InfeasibleLatency => Decision::Defer(DeferReason::Latency),
            })
        })
        .collect()
}
