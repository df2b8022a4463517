use serde::{Deserialize, Serialize};

use super::ManoError;

/// Training strategy for one knowledge base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// Whole task shipped to an infrastructure node with the raw data.
    Centralized,
    /// Layers `0..split_layer` on the device, the rest in the infrastructure.
    Distributed { split_layer: usize },
    /// Local training on devices, model upload for aggregation.
    Federated,
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Centralized => "centralized".into(),
            Strategy::Distributed { split_layer } => format!("distributed(split={split_layer})"),
            Strategy::Federated => "federated".into(),
        }
    }

    pub fn same_kind(&self, other: &Strategy) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerProfile {
    /// Compute units to train this layer over one refinement.
    pub compute: f64,
    /// Bandwidth units for this layer's output activations.
    pub activation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfile {
    pub layers: Vec<LayerProfile>,
    /// Bandwidth needed to stream raw user data.
    pub data_rate: f64,
    /// Bandwidth needed to upload model weights.
    pub model_size: f64,
    /// Slots within which a refinement must complete.
    pub deadline: u64,
}

impl TaskProfile {
    /// Total compute demand of the task.
    pub fn demand(&self) -> f64 {
        self.layers.iter().map(|l| l.compute).sum()
    }

    /// Infrastructure-side compute for each strategy.
    pub fn infra_compute(&self, strategy: &Strategy) -> f64 {
        match strategy {
            Strategy::Centralized => self.demand(),
            Strategy::Distributed { split_layer } => {
                self.layers[*split_layer..].iter().map(|l| l.compute).sum()
            }
            Strategy::Federated => 0.0,
        }
    }

    /// Bandwidth reserved from the user's point of arrival to the training node.
    pub fn reservation(&self, strategy: &Strategy) -> f64 {
        match strategy {
            Strategy::Centralized => self.data_rate,
            Strategy::Distributed { split_layer } => self.layers[*split_layer - 1].activation,
            Strategy::Federated => self.model_size,
        }
    }
}

fn time(work: f64, rate: f64) -> f64 {
    if work <= 0.0 {
        0.0
    } else if rate <= 0.0 {
        f64::INFINITY
    } else {
        work / rate
    }
}

/// Completion time of splitting after `split` layers: the slower of device
/// compute and upstream activation transfer.
pub fn split_cost(task: &TaskProfile, split: usize, device: f64, bandwidth: f64) -> f64 {
    let device_work: f64 = task.layers[..split].iter().map(|l| l.compute).sum();
    let traffic = task.layers[split - 1].activation;
    time(device_work, device).max(time(traffic, bandwidth))
}

/// Split point in `1..layers` with the smallest cost, lowest on ties.
pub fn best_split(task: &TaskProfile, device: f64, bandwidth: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for k in 1..task.layers.len() {
        let c = split_cost(task, k, device, bandwidth);
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((k, c));
        }
    }
    best
}

/// Rule table:
/// 1. device capacity covers the demand: federated;
/// 2. else the access bandwidth carries the raw data rate: centralized;
/// 3. else the split minimizing `max(traffic time, device time)`, if it
///    meets the deadline; otherwise no strategy is feasible.
pub fn select_strategy(
    task: &TaskProfile,
    device_capacity: f64,
    access_bandwidth: f64,
) -> Result<Strategy, ManoError> {
    if device_capacity >= task.demand() {
        return Ok(Strategy::Federated);
    }
    if access_bandwidth >= task.data_rate {
        return Ok(Strategy::Centralized);
    }
    match best_split(task, device_capacity, access_bandwidth) {
        Some((split_layer, cost)) if cost <= task.deadline as f64 => {
            Ok(Strategy::Distributed { split_layer })
        }
        _ => Err(ManoError::NoFeasibleStrategy),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(demand_per_layer: f64) -> TaskProfile {
        TaskProfile {
            layers: vec![
                LayerProfile { compute: demand_per_layer, activation: 8.0 },
                LayerProfile { compute: demand_per_layer, activation: 4.0 },
                LayerProfile { compute: demand_per_layer, activation: 2.0 },
                LayerProfile { compute: demand_per_layer, activation: 1.0 },
            ],
            data_rate: 6.0,
            model_size: 1.0,
            deadline: 10,
        }
    }

    #[test]
    fn rule_one_federated() {
        assert_eq!(select_strategy(&task(2.0), 10.0, 0.0).unwrap(), Strategy::Federated);
    }

    #[test]
    fn rule_two_centralized() {
        assert_eq!(select_strategy(&task(2.0), 2.0, 6.0).unwrap(), Strategy::Centralized);
    }

    #[test]
    fn rule_three_distributed() {
        // device 2, bandwidth 2: split 1 -> max(1, 4) = 4; split 2 -> max(2, 2) = 2;
        // split 3 -> max(3, 1) = 3
        assert_eq!(
            select_strategy(&task(2.0), 2.0, 2.0).unwrap(),
            Strategy::Distributed { split_layer: 2 }
        );
    }

    #[test]
    fn nothing_fits_the_deadline() {
        let mut t = task(2.0);
        t.deadline = 1;
        assert!(matches!(select_strategy(&t, 2.0, 2.0), Err(ManoError::NoFeasibleStrategy)));
        assert!(matches!(select_strategy(&t, 0.0, 0.0), Err(ManoError::NoFeasibleStrategy)));
    }

    #[test]
    fn reservations() {
        let t = task(2.0);
        assert_eq!(t.reservation(&Strategy::Centralized), 6.0);
        assert_eq!(t.reservation(&Strategy::Federated), 1.0);
        assert_eq!(t.reservation(&Strategy::Distributed { split_layer: 2 }), 4.0);
        assert_eq!(t.infra_compute(&Strategy::Distributed { split_layer: 1 }), 6.0);
    }
}
