use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use super::bank::ResourceState;
use super::ManoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Poa,
    Edge,
    Regional,
    Core,
}

impl std::str::FromStr for NodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "poa" => Ok(NodeKind::Poa),
            "edge" => Ok(NodeKind::Edge),
            "regional" => Ok(NodeKind::Regional),
            "core" => Ok(NodeKind::Core),
            other => Err(format!("unknown node kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Compute units per slot.
    pub capacity: f64,
}

impl Node {
    pub fn computes(&self) -> bool {
        self.kind != NodeKind::Poa
    }
}

/// Directed link; `bandwidth` is the protective threshold available to
/// knowledge-base traffic, `latency` in slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub src: usize,
    pub dst: usize,
    pub bandwidth: f64,
    pub latency: u64,
}

pub type LinkId = usize;
pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Feasibility {
    Ok,
    InfeasibleBandwidth,
    InfeasibleLatency,
}

impl Topology {
    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn link_id(&self, src: NodeId, dst: NodeId) -> Option<LinkId> {
        self.links.iter().position(|l| l.src == src && l.dst == dst)
    }

    /// Baseline resource state from the configured capacities.
    pub fn baseline(&self, slot: u64, device_compute: f64) -> ResourceState {
        ResourceState {
            slot,
            node_compute: self.nodes.iter().map(|n| n.capacity).collect(),
            link_bandwidth: self.links.iter().map(|l| l.bandwidth).collect(),
            link_latency: self.links.iter().map(|l| l.latency).collect(),
            device_compute,
        }
    }

    /// Every point of arrival reaches at least one compute node.
    pub fn validate(&self) -> Result<(), ManoError> {
        let all = vec![f64::INFINITY; self.links.len()];
        let lat: Vec<u64> = self.links.iter().map(|l| l.latency).collect();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind != NodeKind::Poa {
                continue;
            }
            let reach = self.shortest_paths(i, 0.0, &all, &lat, &BTreeSet::new());
            let ok = self
                .nodes
                .iter()
                .enumerate()
                .any(|(j, m)| m.computes() && reach[j].is_some());
            if !ok {
                return Err(ManoError::Disconnected(n.name.clone()));
            }
        }
        Ok(())
    }

    /// Minimum-latency paths from `src` over links whose bandwidth is at
    /// least `demand`. Ties resolve towards lower link ids.
    pub fn shortest_paths(
        &self,
        src: NodeId,
        demand: f64,
        bandwidth: &[f64],
        latency: &[u64],
        excluded: &BTreeSet<LinkId>,
    ) -> Vec<Option<(u64, Vec<LinkId>)>> {
        let mut best: Vec<Option<(u64, Vec<LinkId>)>> = vec![None; self.nodes.len()];
        best[src] = Some((0, Vec::new()));
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0u64, src)));
        while let Some(Reverse((dist, u))) = heap.pop() {
            if best[u].as_ref().is_some_and(|(d, _)| *d < dist) {
                continue;
            }
            let path_u = best[u].as_ref().expect("settled").1.clone();
            for (id, link) in self.links.iter().enumerate() {
                if link.src != u || excluded.contains(&id) || bandwidth[id] < demand {
                    continue;
                }
                let nd = dist + latency[id];
                let better = match &best[link.dst] {
                    None => true,
                    Some((d, _)) => nd < *d,
                };
                if better {
                    let mut p = path_u.clone();
                    p.push(id);
                    best[link.dst] = Some((nd, p));
                    heap.push(Reverse((nd, link.dst)));
                }
            }
        }
        best
    }

    /// Largest bottleneck bandwidth from `src` to any compute node.
    pub fn widest_bandwidth(&self, src: NodeId, bandwidth: &[f64], excluded: &BTreeSet<LinkId>) -> f64 {
        let mut width = vec![f64::NEG_INFINITY; self.nodes.len()];
        width[src] = f64::INFINITY;
        // Bellman-Ford style relaxation; topologies are small.
        for _ in 0..self.nodes.len() {
            let mut changed = false;
            for (id, l) in self.links.iter().enumerate() {
                if excluded.contains(&id) {
                    continue;
                }
                let w = width[l.src].min(bandwidth[id]);
                if w > width[l.dst] {
                    width[l.dst] = w;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        self.nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| n.computes() && *i != src)
            .map(|(i, _)| width[i])
            .fold(0.0, f64::max)
    }

    fn check_links(&self, path: &[LinkId]) -> Result<(), ManoError> {
        for (k, &id) in path.iter().enumerate() {
            let link = self.links.get(id).ok_or(ManoError::UnknownLink(id))?;
            if k > 0 && self.links[path[k - 1]].dst != link.src {
                return Err(ManoError::BrokenPath(path.to_vec()));
            }
        }
        Ok(())
    }
}

/// Bandwidth first: `demand` above the smallest threshold on the path is
/// infeasible; otherwise total latency must meet the deadline.
pub fn check_path(
    topology: &Topology,
    state: &ResourceState,
    path: &[LinkId],
    demand: f64,
    deadline: u64,
) -> Result<Feasibility, ManoError> {
    topology.check_links(path)?;
    let min_bw = path
        .iter()
        .map(|&id| state.link_bandwidth[id])
        .fold(f64::INFINITY, f64::min);
    if demand > min_bw {
        return Ok(Feasibility::InfeasibleBandwidth);
    }
    let latency: u64 = path.iter().map(|&id| state.link_latency[id]).sum();
    if latency > deadline {
        return Ok(Feasibility::InfeasibleLatency);
    }
    Ok(Feasibility::Ok)
}

/// Link on `path` with the smallest threshold.
pub fn bottleneck(state: &ResourceState, path: &[LinkId]) -> Option<LinkId> {
    path.iter()
        .copied()
        .min_by(|&a, &b| state.link_bandwidth[a].total_cmp(&state.link_bandwidth[b]))
}
