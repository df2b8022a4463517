use crate::d3ql::{argmax, Architecture, D3qlError, Reader, WeightSnapshot};

use super::KbError;

/// Versioned classifier weights shared between users and the base station.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub service_id: String,
    pub version: u64,
    pub trained_at: u64,
    pub weights: WeightSnapshot,
}

impl KnowledgeBase {
    /// File layout: `u32` service-id length, service-id UTF-8 bytes, `u64`
    /// version, `u64` trained-at slot (all little-endian), then the weight
    /// snapshot.
    pub fn to_bytes(&self) -> Vec<u8> {
        let id = self.service_id.as_bytes();
        let mut out = Vec::with_capacity(20 + id.len() + 8 * self.weights.params.len() + 32);
        out.extend_from_slice(&(id.len() as u32).to_le_bytes());
        out.extend_from_slice(id);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.trained_at.to_le_bytes());
        self.weights.write_to(&mut out);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KbError> {
        let mut r = Reader { bytes, pos: 0 };
        let n = r.u32()? as usize;
        let service_id = std::str::from_utf8(r.take(n)?)
            .map_err(|_| D3qlError::Corrupt("service id is not UTF-8".into()))?
            .to_string();
        let version = r.u64()?;
        let trained_at = r.u64()?;
        let weights = WeightSnapshot::read_from(&mut r)?;
        if r.pos != bytes.len() {
            return Err(D3qlError::Corrupt("trailing bytes".into()).into());
        }
        Ok(Self {
            service_id,
            version,
            trained_at,
            weights,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.weights.arch
    }
}

/// Semantic label of `features` under `kb`, checked against the classifier
/// architecture the caller expects.
pub fn classify(kb: &KnowledgeBase, declared: &Architecture, features: &[f64]) -> Result<usize, KbError> {
    if kb.architecture() != declared {
        return Err(KbError::ArchitectureMismatch {
            version: kb.version,
        });
    }
    let net = kb.weights.to_network()?;
    Ok(argmax(&net.forward(features)?))
}
