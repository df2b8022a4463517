use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::bank::{Layer, ResourceState};
use super::strategy::{Strategy, TaskProfile};
use super::topology::{Feasibility, LinkId, NodeId, Topology};
use super::ManoError;

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub strategy: Strategy,
    pub node: NodeId,
    pub path: Vec<LinkId>,
    pub reservation: f64,
    pub compute: f64,
    pub deadline: u64,
}

/// Resources ruled out by earlier feasibility failures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Exclusions {
    pub nodes: BTreeSet<NodeId>,
    /// Observed thresholds overriding forecasts for specific links.
    pub link_caps: BTreeMap<LinkId, f64>,
}

impl Exclusions {
    pub fn capped_bandwidth(&self, forecast: &[f64]) -> Vec<f64> {
        let mut bw = forecast.to_vec();
        for (&id, &cap) in &self.link_caps {
            bw[id] = bw[id].min(cap);
        }
        bw
    }
}

/// Feasible infrastructure node with the lowest path latency from `poa`,
/// such that every link on the path can carry the strategy's reservation.
pub fn place_training(
    strategy: Strategy,
    task: &TaskProfile,
    topology: &Topology,
    forecast: &ResourceState,
    poa: NodeId,
    exclusions: &Exclusions,
) -> Result<Placement, ManoError> {
    let reservation = task.reservation(&strategy);
    let compute = task.infra_compute(&strategy);
    let bandwidth = exclusions.capped_bandwidth(&forecast.link_bandwidth);
    let paths = topology.shortest_paths(
        poa,
        reservation,
        &bandwidth,
        &forecast.link_latency,
        &BTreeSet::new(),
    );
    topology
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, n)| {
            n.computes() && *i != poa && !exclusions.nodes.contains(i) && forecast.node_compute[*i] >= compute
        })
        .filter_map(|(i, _)| paths[i].as_ref().map(|(lat, p)| (*lat, i, p.clone())))
        .min_by_key(|(lat, i, _)| (*lat, *i))
        .map(|(_, node, path)| Placement {
            strategy,
            node,
            path,
            reservation,
            compute,
            deadline: task.deadline,
        })
        .ok_or(ManoError::NoFeasiblePlacement(strategy.label()))
}

/// Why a plan was sent back to the E2E layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Failure {
    Path(Feasibility),
    Compute,
    NoStrategy,
    NoPlacement,
}

impl Failure {
    pub fn reason(&self) -> &'static str {
        match self {
            Failure::Path(Feasibility::InfeasibleBandwidth) => "bandwidth",
            Failure::Path(Feasibility::InfeasibleLatency) => "latency",
            Failure::Path(Feasibility::Ok) => "ok",
            Failure::Compute => "compute",
            Failure::NoStrategy => "no_feasible_strategy",
            Failure::NoPlacement => "no_feasible_placement",
        }
    }

    /// Layer that detects the failure.
    pub fn layer(&self) -> Layer {
        match self {
            Failure::Compute => Layer::Resource,
            Failure::NoStrategy => Layer::E2E,
            _ => Layer::Domain,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReassessEvent {
    pub attempt: u32,
    pub failure: Failure,
    pub exclusions: Exclusions,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EscalationEvent {
    Reassess(ReassessEvent),
    Terminal { attempts: u32, failure: Failure },
}

/// Bounded re-planning state for one planning episode.
#[derive(Debug, Clone)]
pub struct Escalation {
    max_retries: u32,
    attempts: u32,
    exclusions: Exclusions,
    terminal: bool,
}

pub const DEFAULT_RETRIES: u32 = 3;

impl Escalation {
    pub fn new(max_retries: u32) -> Self {
        Self {
            max_retries,
            attempts: 0,
            exclusions: Exclusions::default(),
            terminal: false,
        }
    }

    pub fn exclusions(&self) -> &Exclusions {
        &self.exclusions
    }

    pub fn retries_used(&self) -> u32 {
        self.attempts
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal
    }
}

impl Default for Escalation {
    fn default() -> Self {
        Self::new(DEFAULT_RETRIES)
    }
}

/// Turns a feasibility failure into one reassessment request, excluding the
/// failing resource, or into a single terminal failure once retries run out.
/// `Feasibility::Ok` produces no event.
pub fn escalate(
    failure: Failure,
    placement: Option<&Placement>,
    current: &ResourceState,
    state: &mut Escalation,
) -> Option<EscalationEvent> {
    if matches!(failure, Failure::Path(Feasibility::Ok)) || state.terminal {
        return None;
    }
    if state.attempts >= state.max_retries {
        state.terminal = true;
        return Some(EscalationEvent::Terminal {
            attempts: state.attempts,
            failure,
        });
    }
    state.attempts += 1;
    if let Some(p) = placement {
        match failure {
            Failure::Path(Feasibility::InfeasibleBandwidth) => {
                // The link stays usable for smaller reservations.
                if let Some(link) = super::topology::bottleneck(current, &p.path) {
                    state
                        .exclusions
                        .link_caps
                        .insert(link, current.link_bandwidth[link]);
                }
            }
            Failure::Path(Feasibility::InfeasibleLatency) | Failure::Compute => {
                state.exclusions.nodes.insert(p.node);
            }
            _ => {}
        }
    }
    Some(EscalationEvent::Reassess(ReassessEvent {
        attempt: state.attempts,
        failure,
        exclusions: state.exclusions.clone(),
    }))
}
