//! Byte-stable weight snapshots.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic      4 bytes   "D3QW"
//! version    u32       format version (1)
//! n_dims     u32       number of layer sizes that follow
//! dims       u32 * n   input, hidden..., actions
//! n_params   u64
//! params     f64 * n   per layer (trunk..., value head, advantage head):
//!                      weights row-major, then bias
//! ```

use super::network::{Architecture, QNetwork};
use super::D3qlError;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"D3QW";
pub const SNAPSHOT_VERSION: u32 = 1;

/// Immutable copy of a network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSnapshot {
    pub arch: Architecture,
    pub params: Vec<f64>,
}

impl WeightSnapshot {
    pub fn of(net: &QNetwork) -> Self {
        Self {
            arch: net.architecture().clone(),
            params: net.params(),
        }
    }

    pub fn to_network(&self) -> Result<QNetwork, D3qlError> {
        QNetwork::from_params(self.arch.clone(), &self.params)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 8 * self.params.len());
        self.write_to(&mut out);
        out
    }

    pub(crate) fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        let dims: Vec<usize> = std::iter::once(self.arch.input)
            .chain(self.arch.hidden.iter().copied())
            .chain(std::iter::once(self.arch.actions))
            .collect();
        out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
        for d in dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, D3qlError> {
        let mut r = Reader { bytes, pos: 0 };
        let snap = Self::read_from(&mut r)?;
        if r.pos != bytes.len() {
            return Err(D3qlError::Corrupt("trailing bytes".into()));
        }
        Ok(snap)
    }

    pub(crate) fn read_from(r: &mut Reader<'_>) -> Result<Self, D3qlError> {
        if r.take(4)? != SNAPSHOT_MAGIC {
            return Err(D3qlError::Corrupt("bad magic".into()));
        }
        let version = r.u32()?;
        if version != SNAPSHOT_VERSION {
            return Err(D3qlError::UnsupportedVersion(version));
        }
        let n_dims = r.u32()? as usize;
        if n_dims < 2 {
            return Err(D3qlError::Corrupt("fewer than two layer sizes".into()));
        }
        let dims = (0..n_dims)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let arch = Architecture::new(dims[0], dims[1..n_dims - 1].to_vec(), dims[n_dims - 1]);
        arch.validate()?;
        let n_params = r.u64()? as usize;
        if n_params != arch.param_count() {
            return Err(D3qlError::Corrupt(format!(
                "parameter count {n_params} does not match architecture ({})",
                arch.param_count()
            )));
        }
        let params = (0..n_params)
            .map(|_| r.take(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { arch, params })
    }
}

pub(crate) struct Reader<'a> {
    pub(crate) bytes: &'a [u8],
    pub(crate) pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], D3qlError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| D3qlError::Corrupt("unexpected end of data".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32, D3qlError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Result<u64, D3qlError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
