use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::ManoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Layer {
    E2E,
    Domain,
    Resource,
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::E2E => "e2e",
            Layer::Domain => "domain",
            Layer::Resource => "resource",
        }
    }
}

/// Availability snapshot of the compute-network substrate at one slot.
/// Vectors are indexed by topology node / link id.
#[derive(Debug, Clone, PartialEq)]
pub struct ResourceState {
    pub slot: u64,
    pub node_compute: Vec<f64>,
    pub link_bandwidth: Vec<f64>,
    pub link_latency: Vec<u64>,
    pub device_compute: f64,
}

impl ResourceState {
    pub fn validate(&self) -> Result<(), ManoError> {
        let ok = self
            .node_compute
            .iter()
            .chain(&self.link_bandwidth)
            .chain(std::iter::once(&self.device_compute))
            .all(|v| v.is_finite() && *v >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(ManoError::NegativeCapacity(self.slot))
        }
    }
}

/// History windows of the three layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Windows {
    pub e2e: usize,
    pub domain: usize,
    pub resource: usize,
}

impl Default for Windows {
    fn default() -> Self {
        Self {
            e2e: 16,
            domain: 8,
            resource: 4,
        }
    }
}

impl Windows {
    pub fn validate(&self) -> Result<(), ManoError> {
        if self.e2e >= self.domain && self.domain >= self.resource && self.resource >= 1 {
            Ok(())
        } else {
            Err(ManoError::WindowOrder(*self))
        }
    }

    pub fn get(&self, layer: Layer) -> usize {
        match layer {
            Layer::E2E => self.e2e,
            Layer::Domain => self.domain,
            Layer::Resource => self.resource,
        }
    }
}

/// Ring buffer of the most recent `window` resource samples of one layer.
#[derive(Debug, Clone)]
pub struct MemoryBank {
    layer: Layer,
    window: usize,
    samples: VecDeque<ResourceState>,
}

impl MemoryBank {
    pub fn new(layer: Layer, window: usize) -> Self {
        assert!(window >= 1, "memory bank window must be positive");
        Self {
            layer,
            window,
            samples: VecDeque::with_capacity(window),
        }
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> impl ExactSizeIterator<Item = &ResourceState> {
        self.samples.iter()
    }

    pub fn latest(&self) -> Option<&ResourceState> {
        self.samples.back()
    }

    pub fn ingest(&mut self, sample: ResourceState) -> Result<(), ManoError> {
        if let Some(last) = self.samples.back() {
            if sample.slot <= last.slot {
                return Err(ManoError::OutOfOrderSample {
                    last: last.slot,
                    got: sample.slot,
                });
            }
        }
        sample.validate()?;
        if self.samples.len() == self.window {
            self.samples.pop_front();
        }
        self.samples.push_back(sample);
        Ok(())
    }
}

/// One bank per layer, fed from the same sample stream.
#[derive(Debug, Clone)]
pub struct LayeredBanks {
    pub e2e: MemoryBank,
    pub domain: MemoryBank,
    pub resource: MemoryBank,
}

impl LayeredBanks {
    pub fn new(windows: Windows) -> Result<Self, ManoError> {
        windows.validate()?;
        Ok(Self {
            e2e: MemoryBank::new(Layer::E2E, windows.e2e),
            domain: MemoryBank::new(Layer::Domain, windows.domain),
            resource: MemoryBank::new(Layer::Resource, windows.resource),
        })
    }

    pub fn ingest(&mut self, sample: &ResourceState) -> Result<(), ManoError> {
        self.e2e.ingest(sample.clone())?;
        self.domain.ingest(sample.clone())?;
        self.resource.ingest(sample.clone())
    }
}
