//! Slot-ticked replay of a scenario through the three layers.

use std::io::Write;

use crate::d3ql::{Architecture, WeightSnapshot};
use crate::semantic_kb::KnowledgeBase;

use super::bank::{Layer, LayeredBanks, ResourceState};
use super::distribution::{schedule_distribution, Decision, DeferReason, DistributionTarget};
use super::forecast::{forecast, ExpSmoothing};
use super::placement::{escalate, place_training, Escalation, EscalationEvent, Failure, Placement};
use super::scenario::Scenario;
use super::strategy::{select_strategy, Strategy};
use super::topology::{check_path, Feasibility};
use super::ManoError;

pub const EVENT_LOG_HEADER: &str = "slot,layer,event_kind,subject,decision,reason";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Placement,
    StrategySwitch,
    Infeasible,
    Escalation,
    TerminalFailure,
    Rescale,
    Refinement,
    Distribution,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::Placement => "placement",
            EventKind::StrategySwitch => "strategy_switch",
            EventKind::Infeasible => "infeasible",
            EventKind::Escalation => "escalation",
            EventKind::TerminalFailure => "terminal_failure",
            EventKind::Rescale => "rescale",
            EventKind::Refinement => "refinement",
            EventKind::Distribution => "distribution",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub slot: u64,
    pub layer: Layer,
    pub kind: EventKind,
    pub subject: String,
    pub decision: String,
    pub reason: String,
}

impl Event {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.slot,
            self.layer.name(),
            self.kind.label(),
            self.subject,
            self.decision,
            self.reason
        )
    }
}

/// Orchestrator state for one scenario replay.
pub struct Controller<'a> {
    scenario: &'a Scenario,
    banks: LayeredBanks,
    forecaster: ExpSmoothing,
    active: Option<Placement>,
    last_strategy: Option<Strategy>,
    escalation: Escalation,
    /// State that exhausted the retry budget; planning resumes once it changes.
    blocked_on: Option<ResourceState>,
    kb: KnowledgeBase,
    last_refined: u64,
    targets: Vec<DistributionTarget>,
    events: Vec<Event>,
}

fn same_resources(a: &ResourceState, b: &ResourceState) -> bool {
    a.node_compute == b.node_compute
        && a.link_bandwidth == b.link_bandwidth
        && a.link_latency == b.link_latency
        && a.device_compute == b.device_compute
}

impl<'a> Controller<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, ManoError> {
        let targets = scenario
            .services
            .iter()
            .map(|s| DistributionTarget {
                name: s.name.clone(),
                node: s.target,
                drift: s.drift,
                threshold: s.threshold,
                kb_size: s.kb_size,
                deadline: s.deadline,
                deployed_version: 0,
                deployed_trained_at: 0,
            })
            .collect();
        Ok(Self {
            scenario,
            banks: LayeredBanks::new(scenario.windows)?,
            forecaster: ExpSmoothing {
                alpha: scenario.alpha,
            },
            active: None,
            last_strategy: None,
            escalation: Escalation::new(scenario.retries),
            blocked_on: None,
            kb: KnowledgeBase {
                service_id: "kb".into(),
                version: 0,
                trained_at: 0,
                // Training is modeled by placement only; versions carry the state.
                weights: WeightSnapshot {
                    arch: Architecture {
                        input: 0,
                        hidden: Vec::new(),
                        actions: 0,
                    },
                    params: Vec::new(),
                },
            },
            last_refined: 0,
            targets,
            events: Vec::new(),
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn active(&self) -> Option<&Placement> {
        self.active.as_ref()
    }

    pub fn kb_version(&self) -> u64 {
        self.kb.version
    }

    fn log(&mut self, slot: u64, layer: Layer, kind: EventKind, subject: &str, decision: &str, reason: &str) {
        self.events.push(Event {
            slot,
            layer,
            kind,
            subject: subject.to_string(),
            decision: decision.to_string(),
            reason: reason.to_string(),
        });
    }

    fn node_name(&self, id: usize) -> &str {
        &self.scenario.topology.nodes[id].name
    }

    fn path_label(&self, path: &[usize]) -> String {
        let topo = &self.scenario.topology;
        let mut names = vec![self.node_name(self.scenario.poa).to_string()];
        names.extend(path.iter().map(|&l| topo.nodes[topo.links[l].dst].name.clone()));
        names.join(">")
    }

    /// Checks a placement against the observed state.
    fn verify(&self, p: &Placement, state: &ResourceState) -> Result<Option<Failure>, ManoError> {
        if state.node_compute[p.node] < p.compute {
            return Ok(Some(Failure::Compute));
        }
        Ok(match check_path(&self.scenario.topology, state, &p.path, p.reservation, p.deadline)? {
            Feasibility::Ok => None,
            f => Some(Failure::Path(f)),
        })
    }

    fn record_escalation(&mut self, slot: u64, event: EscalationEvent) {
        match event {
            EscalationEvent::Reassess(r) => {
                let reason = format!("{}:attempt={}", r.failure.reason(), r.attempt);
                self.log(slot, Layer::E2E, EventKind::Escalation, "strategy", "reassess", &reason);
            }
            EscalationEvent::Terminal { attempts, failure } => {
                let reason = format!("{}:attempts={attempts}", failure.reason());
                self.log(slot, Layer::E2E, EventKind::TerminalFailure, "strategy", "abandon", &reason);
            }
        }
    }

    fn plan(&mut self, slot: u64, state: &ResourceState) -> Result<(), ManoError> {
        let scenario = self.scenario;
        let topo = &scenario.topology;
        loop {
            let e2e = forecast(&self.banks.e2e, &self.forecaster, 1)?.remove(0);
            let domain = forecast(&self.banks.domain, &self.forecaster, 1)?.remove(0);
            let resource = forecast(&self.banks.resource, &self.forecaster, 1)?.remove(0);
            let exclusions = self.escalation.exclusions().clone();

            let access_bw = exclusions.capped_bandwidth(&e2e.link_bandwidth);
            let access = topo.widest_bandwidth(scenario.poa, &access_bw, &Default::default());
            let mut outlook = domain.clone();
            outlook.node_compute = resource.node_compute.clone();

            let placed = select_strategy(&scenario.task, e2e.device_compute, access)
                .map_err(|_| Failure::NoStrategy)
                .and_then(|strategy| {
                    place_training(strategy, &scenario.task, topo, &outlook, scenario.poa, &exclusions)
                        .map_err(|_| Failure::NoPlacement)
                });
            let attempt = match placed {
                Ok(p) => match self.verify(&p, state)? {
                    None => Ok(p),
                    Some(f) => Err((f, Some(p))),
                },
                Err(f) => Err((f, None)),
            };

            match attempt {
                Ok(p) => {
                    let subject = self.node_name(p.node).to_string();
                    let reason = format!("path={};reserve={}", self.path_label(&p.path), p.reservation);
                    self.log(slot, Layer::Domain, EventKind::Placement, &subject, &p.strategy.label(), &reason);
                    if let Some(prev) = self.last_strategy {
                        if !prev.same_kind(&p.strategy) {
                            let reason = format!("from={}", prev.label());
                            self.log(slot, Layer::E2E, EventKind::StrategySwitch, "strategy", &p.strategy.label(), &reason);
                        }
                    }
                    self.last_strategy = Some(p.strategy);
                    self.active = Some(p);
                    self.escalation = Escalation::new(scenario.retries);
                    return Ok(());
                }
                Err((failure, placement)) => {
                    if let Some(p) = &placement {
                        let subject = self.node_name(p.node).to_string();
                        self.log(slot, failure.layer(), EventKind::Infeasible, &subject, &p.strategy.label(), failure.reason());
                    }
                    match escalate(failure, placement.as_ref(), state, &mut self.escalation) {
                        Some(EscalationEvent::Reassess(r)) => {
                            self.record_escalation(slot, EscalationEvent::Reassess(r));
                        }
                        Some(terminal) => {
                            self.record_escalation(slot, terminal);
                            self.blocked_on = Some(state.clone());
                            self.escalation = Escalation::new(scenario.retries);
                            return Ok(());
                        }
                        None => return Ok(()),
                    }
                }
            }
        }
    }

    fn distribute(&mut self, slot: u64, state: &ResourceState) -> Result<(), ManoError> {
        let Some(p) = &self.active else {
            return Ok(());
        };
        if self.scenario.retrain_every > 0 && slot >= self.last_refined + self.scenario.retrain_every {
            self.kb.version += 1;
            self.kb.trained_at = slot;
            self.last_refined = slot;
            let subject = self.node_name(p.node).to_string();
            let decision = format!("version={}", self.kb.version);
            self.log(slot, Layer::E2E, EventKind::Refinement, &subject, &decision, &p.strategy.label());
        }
        let source = self.active.as_ref().expect("checked").node;
        let decisions = schedule_distribution(&self.kb, &self.targets, &self.scenario.topology, state, source, slot)?;
        for (i, d) in decisions.into_iter().enumerate() {
            let name = self.targets[i].name.clone();
            match d {
                Decision::Deliver => {
                    self.targets[i].deployed_version = self.kb.version;
                    self.targets[i].deployed_trained_at = self.kb.trained_at;
                    let decision = format!("deliver:v{}", self.kb.version);
                    self.log(slot, Layer::Domain, EventKind::Distribution, &name, &decision, "stale");
                }
                Decision::Defer(DeferReason::Fresh | DeferReason::UpToDate) => {}
                Decision::Defer(reason) => {
                    self.log(slot, Layer::Domain, EventKind::Distribution, &name, "defer", reason.label());
                }
            }
        }
        Ok(())
    }

    /// Advances one slot with the observed resource state.
    pub fn tick(&mut self, state: &ResourceState) -> Result<(), ManoError> {
        let slot = state.slot;
        let previous = self.banks.resource.latest().cloned();
        self.banks.ingest(state)?;

        if let Some(p) = self.active.clone() {
            match self.verify(&p, state)? {
                None => {
                    if let Some(prev) = previous {
                        if prev.node_compute[p.node] != state.node_compute[p.node] {
                            let subject = self.node_name(p.node).to_string();
                            let reason = format!("capacity={}", state.node_compute[p.node]);
                            self.log(slot, Layer::Resource, EventKind::Rescale, &subject, "keep", &reason);
                        }
                    }
                }
                Some(failure) => {
                    let subject = self.node_name(p.node).to_string();
                    self.log(slot, failure.layer(), EventKind::Infeasible, &subject, &p.strategy.label(), failure.reason());
                    self.active = None;
                    if let Some(ev) = escalate(failure, Some(&p), state, &mut self.escalation) {
                        let terminal = matches!(ev, EscalationEvent::Terminal { .. });
                        self.record_escalation(slot, ev);
                        if terminal {
                            self.blocked_on = Some(state.clone());
                            self.escalation = Escalation::new(self.scenario.retries);
                        }
                    }
                }
            }
        }

        if self.active.is_none() {
            let blocked = self.blocked_on.as_ref().is_some_and(|b| same_resources(b, state));
            if !blocked {
                self.blocked_on = None;
                self.plan(slot, state)?;
            }
        }

        self.distribute(slot, state)
    }
}

/// Replays `scenario` for its full horizon and returns the event log.
pub fn run_scenario(scenario: &Scenario) -> Result<Vec<Event>, ManoError> {
    let mut controller = Controller::new(scenario)?;
    let mut state = scenario.topology.baseline(0, scenario.device_compute);
    let mut pending = scenario.overrides.iter().peekable();
    for slot in 0..scenario.horizon {
        state.slot = slot;
        while let Some(o) = pending.next_if(|o| o.slot <= slot) {
            o.apply(&mut state);
        }
        controller.tick(&state)?;
    }
    Ok(controller.events)
}

pub fn write_event_log<W: Write>(mut out: W, events: &[Event]) -> std::io::Result<()> {
    writeln!(out, "{EVENT_LOG_HEADER}")?;
    for e in events {
        writeln!(out, "{}", e.csv_row())?;
    }
    Ok(())
}
