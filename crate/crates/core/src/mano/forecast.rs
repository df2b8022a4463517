use super::bank::{MemoryBank, ResourceState};
use super::ManoError;

/// Predicts a scalar series forward.
pub trait Forecaster {
    fn forecast(&self, series: &[f64], horizon: usize) -> Vec<f64>;
}

/// Simple exponential smoothing, flat over the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpSmoothing {
    pub alpha: f64,
}

impl Default for ExpSmoothing {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

impl ExpSmoothing {
    pub fn smooth(&self, series: &[f64]) -> Option<f64> {
        let (first, rest) = series.split_first()?;
        Some(
            rest.iter()
                .fold(*first, |s, x| self.alpha * x + (1.0 - self.alpha) * s),
        )
    }
}

impl Forecaster for ExpSmoothing {
    fn forecast(&self, series: &[f64], horizon: usize) -> Vec<f64> {
        match self.smooth(series) {
            Some(level) => vec![level; horizon],
            None => Vec::new(),
        }
    }
}

/// Per-quantity forecast of a bank's contents, `horizon` steps ahead.
/// Latencies are carried over from the latest sample.
pub fn forecast<F: Forecaster + ?Sized>(
    bank: &MemoryBank,
    forecaster: &F,
    horizon: usize,
) -> Result<Vec<ResourceState>, ManoError> {
    let latest = bank.latest().ok_or(ManoError::EmptyBank(bank.layer()))?;
    let samples: Vec<&ResourceState> = bank.samples().collect();
    let series = |f: &dyn Fn(&ResourceState) -> f64| -> Vec<f64> {
        forecaster.forecast(&samples.iter().map(|s| f(s)).collect::<Vec<_>>(), horizon)
    };
    let nodes: Vec<Vec<f64>> = (0..latest.node_compute.len())
        .map(|i| series(&|s| s.node_compute[i]))
        .collect();
    let links: Vec<Vec<f64>> = (0..latest.link_bandwidth.len())
        .map(|i| series(&|s| s.link_bandwidth[i]))
        .collect();
    let device = series(&|s| s.device_compute);
    Ok((0..horizon)
        .map(|h| ResourceState {
            slot: latest.slot + 1 + h as u64,
            node_compute: nodes.iter().map(|n| n[h].max(0.0)).collect(),
            link_bandwidth: links.iter().map(|l| l[h].max(0.0)).collect(),
            link_latency: latest.link_latency.clone(),
            device_compute: device[h].max(0.0),
        })
        .collect())
}

/// Most pessimistic value of every quantity over a forecast horizon.
pub fn pessimistic(steps: &[ResourceState]) -> Option<ResourceState> {
    let mut out = steps.first()?.clone();
    for s in &steps[1..] {
        for (a, b) in out.node_compute.iter_mut().zip(&s.node_compute) {
            *a = a.min(*b);
        }
        for (a, b) in out.link_bandwidth.iter_mut().zip(&s.link_bandwidth) {
            *a = a.min(*b);
        }
        out.device_compute = out.device_compute.min(s.device_compute);
    }
    Some(out)
}
