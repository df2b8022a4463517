use serde::{Deserialize, Serialize};

use super::KnowledgeBase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Delivery {
    Deliver,
    Defer,
}

/// Linear accuracy decay since a KB was trained, bounded below by `floor`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftModel {
    pub accuracy_at_training: f64,
    pub decay_per_slot: f64,
    pub floor: f64,
}

impl DriftModel {
    pub fn estimated_accuracy(&self, trained_at: u64, now: u64) -> f64 {
        let elapsed = now.saturating_sub(trained_at) as f64;
        (self.accuracy_at_training - self.decay_per_slot * elapsed).max(self.floor)
    }
}

/// Deliver a fresh KB once the estimated accuracy of the deployed one drops
/// below the service threshold.
pub fn staleness_trigger(kb: &KnowledgeBase, drift: &DriftModel, qos_threshold: f64, now: u64) -> Delivery {
    if drift.estimated_accuracy(kb.trained_at, now) < qos_threshold {
        Delivery::Deliver
    } else {
        Delivery::Defer
    }
}
