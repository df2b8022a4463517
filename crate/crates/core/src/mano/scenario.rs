//! Line-oriented scenario files.
//!
//! ```text
//! # comment
//! horizon 100
//! windows 16 8 4
//! alpha 0.5
//! retries 3
//! node poa0 poa 0
//! node edge0 edge 10
//! link poa0 edge0 20 1
//! device poa0 2
//! task layers=2:4,2:2,4:1 data_rate=6 model_size=1 deadline=10 retrain_every=10
//! service cam target=edge0 accuracy=0.95 decay=0.01 threshold=0.8 floor=0.5 size=1 deadline=5
//! override 50 link poa0 edge0 bandwidth 2
//! override 60 node edge0 capacity 4
//! override 70 device 1
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use super::bank::{ResourceState, Windows};
use super::placement::DEFAULT_RETRIES;
use super::strategy::{LayerProfile, TaskProfile};
use super::topology::{Link, LinkId, Node, NodeId, NodeKind, Topology};
use super::ManoError;
use crate::semantic_kb::DriftModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceSpec {
    pub name: String,
    pub target: NodeId,
    pub drift: DriftModel,
    pub threshold: f64,
    pub kb_size: f64,
    pub deadline: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverrideTarget {
    LinkBandwidth(LinkId),
    LinkLatency(LinkId),
    NodeCapacity(NodeId),
    Device,
}

/// Persistent change of one quantity from `slot` onwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Override {
    pub slot: u64,
    pub target: OverrideTarget,
    pub value: f64,
}

impl Override {
    pub fn apply(&self, state: &mut ResourceState) {
        match self.target {
            OverrideTarget::LinkBandwidth(id) => state.link_bandwidth[id] = self.value,
            OverrideTarget::LinkLatency(id) => state.link_latency[id] = self.value as u64,
            OverrideTarget::NodeCapacity(id) => state.node_compute[id] = self.value,
            OverrideTarget::Device => state.device_compute = self.value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub horizon: u64,
    pub windows: Windows,
    pub alpha: f64,
    pub retries: u32,
    pub topology: Topology,
    pub poa: NodeId,
    pub device_compute: f64,
    pub task: TaskProfile,
    pub retrain_every: u64,
    pub services: Vec<ServiceSpec>,
    /// Sorted by slot, file order within a slot.
    pub overrides: Vec<Override>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ManoError> {
        std::fs::read_to_string(path)?.parse()
    }

    /// Resource state at `slot` with every override up to it applied.
    pub fn state_at(&self, slot: u64) -> ResourceState {
        let mut s = self.topology.baseline(slot, self.device_compute);
        for o in self.overrides.iter().take_while(|o| o.slot <= slot) {
            o.apply(&mut s);
        }
        s
    }
}

fn num<T: FromStr>(line: usize, what: &str, v: &str) -> Result<T, ManoError> {
    v.parse().map_err(|_| ManoError::Parse {
        line,
        message: format!("invalid {what} `{v}`"),
    })
}

fn nonneg(line: usize, what: &str, v: &str) -> Result<f64, ManoError> {
    let x: f64 = num(line, what, v)?;
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(ManoError::Parse {
            line,
            message: format!("{what} must be a non-negative number, got `{v}`"),
        })
    }
}

fn err(line: usize, message: impl Into<String>) -> ManoError {
    ManoError::Parse {
        line,
        message: message.into(),
    }
}

fn keyvals<'a>(line: usize, fields: &[&'a str]) -> Result<BTreeMap<&'a str, &'a str>, ManoError> {
    fields
        .iter()
        .map(|f| f.split_once('=').ok_or_else(|| err(line, format!("expected key=value, got `{f}`"))))
        .collect()
}

fn take<'a>(line: usize, kv: &mut BTreeMap<&'a str, &'a str>, key: &str) -> Result<&'a str, ManoError> {
    kv.remove(key).ok_or_else(|| err(line, format!("missing `{key}`")))
}

fn no_extra(line: usize, kv: &BTreeMap<&str, &str>) -> Result<(), ManoError> {
    match kv.keys().next() {
        Some(k) => Err(err(line, format!("unknown key `{k}`"))),
        None => Ok(()),
    }
}

fn arity(line: usize, fields: &[&str], n: usize, usage: &str) -> Result<(), ManoError> {
    if fields.len() == n {
        Ok(())
    } else {
        Err(err(line, format!("expected `{usage}`")))
    }
}

impl FromStr for Scenario {
    type Err = ManoError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut horizon = None;
        let mut windows = Windows::default();
        let mut alpha = 0.5;
        let mut retries = DEFAULT_RETRIES;
        let mut topology = Topology::default();
        let mut device = None;
        let mut task = None;
        let mut services = Vec::new();
        let mut overrides = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            let node = |name: &str, topology: &Topology| {
                topology
                    .node_id(name)
                    .ok_or_else(|| err(line, format!("unknown node `{name}`")))
            };
            match fields[0] {
                "horizon" => {
                    arity(line, &fields, 2, "horizon <slots>")?;
                    horizon = Some(num(line, "horizon", fields[1])?);
                }
                "windows" => {
                    arity(line, &fields, 4, "windows <e2e> <domain> <resource>")?;
                    windows = Windows {
                        e2e: num(line, "window", fields[1])?,
                        domain: num(line, "window", fields[2])?,
                        resource: num(line, "window", fields[3])?,
                    };
                    windows.validate().map_err(|e| err(line, e.to_string()))?;
                }
                "alpha" => {
                    arity(line, &fields, 2, "alpha <factor>")?;
                    alpha = num(line, "alpha", fields[1])?;
                    if !(alpha > 0.0 && alpha <= 1.0) {
                        return Err(err(line, "alpha must lie in (0, 1]"));
                    }
                }
                "retries" => {
                    arity(line, &fields, 2, "retries <n>")?;
                    retries = num(line, "retries", fields[1])?;
                }
                "node" => {
                    arity(line, &fields, 4, "node <name> <kind> <capacity>")?;
                    if topology.node_id(fields[1]).is_some() {
                        return Err(err(line, format!("duplicate node `{}`", fields[1])));
                    }
                    let kind = NodeKind::from_str(fields[2]).map_err(|m| err(line, m))?;
                    topology.nodes.push(Node {
                        name: fields[1].to_string(),
                        kind,
                        capacity: nonneg(line, "capacity", fields[3])?,
                    });
                }
                "link" => {
                    arity(line, &fields, 5, "link <src> <dst> <bandwidth> <latency>")?;
                    let src = node(fields[1], &topology)?;
                    let dst = node(fields[2], &topology)?;
                    if topology.link_id(src, dst).is_some() {
                        return Err(err(line, "duplicate link"));
                    }
                    topology.links.push(Link {
                        src,
                        dst,
                        bandwidth: nonneg(line, "bandwidth", fields[3])?,
                        latency: num(line, "latency", fields[4])?,
                    });
                }
                "device" => {
                    arity(line, &fields, 3, "device <poa> <capacity>")?;
                    let poa = node(fields[1], &topology)?;
                    if topology.nodes[poa].kind != NodeKind::Poa {
                        return Err(err(line, format!("`{}` is not a point of arrival", fields[1])));
                    }
                    device = Some((poa, nonneg(line, "capacity", fields[2])?));
                }
                "task" => {
                    let mut kv = keyvals(line, &fields[1..])?;
                    let layers = take(line, &mut kv, "layers")?
                        .split(',')
                        .map(|l| {
                            let (c, a) = l
                                .split_once(':')
                                .ok_or_else(|| err(line, format!("expected compute:activation, got `{l}`")))?;
                            Ok(LayerProfile {
                                compute: nonneg(line, "compute", c)?,
                                activation: nonneg(line, "activation", a)?,
                            })
                        })
                        .collect::<Result<Vec<_>, ManoError>>()?;
                    let t = TaskProfile {
                        layers,
                        data_rate: nonneg(line, "data_rate", take(line, &mut kv, "data_rate")?)?,
                        model_size: nonneg(line, "model_size", take(line, &mut kv, "model_size")?)?,
                        deadline: num(line, "deadline", take(line, &mut kv, "deadline")?)?,
                    };
                    let every = match kv.remove("retrain_every") {
                        Some(v) => num(line, "retrain_every", v)?,
                        None => 0,
                    };
                    no_extra(line, &kv)?;
                    task = Some((t, every));
                }
                "service" => {
                    if fields.len() < 2 {
                        return Err(err(line, "expected `service <name> key=value...`"));
                    }
                    let mut kv = keyvals(line, &fields[2..])?;
                    let target = node(take(line, &mut kv, "target")?, &topology)?;
                    let spec = ServiceSpec {
                        name: fields[1].to_string(),
                        target,
                        drift: DriftModel {
                            accuracy_at_training: num(line, "accuracy", take(line, &mut kv, "accuracy")?)?,
                            decay_per_slot: nonneg(line, "decay", take(line, &mut kv, "decay")?)?,
                            floor: num(line, "floor", take(line, &mut kv, "floor")?)?,
                        },
                        threshold: num(line, "threshold", take(line, &mut kv, "threshold")?)?,
                        kb_size: nonneg(line, "size", take(line, &mut kv, "size")?)?,
                        deadline: num(line, "deadline", take(line, &mut kv, "deadline")?)?,
                    };
                    no_extra(line, &kv)?;
                    services.push(spec);
                }
                "override" => {
                    if fields.len() < 3 {
                        return Err(err(line, "expected `override <slot> link|node|device ...`"));
                    }
                    let slot = num(line, "slot", fields[1])?;
                    let (target, value) = match fields[2] {
                        "link" => {
                            arity(line, &fields, 7, "override <slot> link <src> <dst> bandwidth|latency <value>")?;
                            let src = node(fields[3], &topology)?;
                            let dst = node(fields[4], &topology)?;
                            let id = topology
                                .link_id(src, dst)
                                .ok_or_else(|| err(line, format!("no link {} -> {}", fields[3], fields[4])))?;
                            let t = match fields[5] {
                                "bandwidth" => OverrideTarget::LinkBandwidth(id),
                                "latency" => OverrideTarget::LinkLatency(id),
                                q => return Err(err(line, format!("unknown link quantity `{q}`"))),
                            };
                            if t == OverrideTarget::LinkLatency(id) {
                                let _: u64 = num(line, "latency", fields[6])?;
                            }
                            (t, nonneg(line, "value", fields[6])?)
                        }
                        "node" => {
                            arity(line, &fields, 6, "override <slot> node <name> capacity <value>")?;
                            if fields[4] != "capacity" {
                                return Err(err(line, format!("unknown node quantity `{}`", fields[4])));
                            }
                            (
                                OverrideTarget::NodeCapacity(node(fields[3], &topology)?),
                                nonneg(line, "value", fields[5])?,
                            )
                        }
                        "device" => {
                            arity(line, &fields, 4, "override <slot> device <value>")?;
                            (OverrideTarget::Device, nonneg(line, "value", fields[3])?)
                        }
                        other => return Err(err(line, format!("unknown override target `{other}`"))),
                    };
                    overrides.push(Override { slot, target, value });
                }
                other => return Err(err(line, format!("unknown directive `{other}`"))),
            }
        }

        let missing = |what: &str| ManoError::InvalidScenario(format!("missing `{what}` line"));
        let horizon = horizon.ok_or_else(|| missing("horizon"))?;
        let (poa, device_compute) = device.ok_or_else(|| missing("device"))?;
        let (task, retrain_every) = task.ok_or_else(|| missing("task"))?;
        if task.layers.is_empty() {
            return Err(ManoError::InvalidScenario("task has no layers".into()));
        }
        topology.validate()?;
        overrides.sort_by_key(|o| o.slot);
        Ok(Scenario {
            horizon,
            windows,
            alpha,
            retries,
            topology,
            poa,
            device_compute,
            task,
            retrain_every,
            services,
            overrides,
        })
    }
}
