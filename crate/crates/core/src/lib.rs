//! Semantic-aware medium access and knowledge-base orchestration.
//!
//! * [`mac_env`]: slotted multi-channel uplink cell with group-shared semantics.
//! * [`d3ql`]: dueling double deep Q-learning engine.
//! * [`agents`]: SAMA-D3QL, MA-D3QL and random access policies.
//! * [`oracle`]: exhaustive per-slot optimum.
//! * [`semantic_kb`]: federated semantic classifier and versioned knowledge bases.
//! * [`mano`]: layered knowledge-base management and orchestration loop.
//! * [`harness`]: experiments, sweeps and CSV output.

pub mod agents;
pub mod d3ql;
pub mod exec;
pub mod harness;
pub mod mac_env;
pub mod mano;
pub mod oracle;
pub mod rng;
pub mod semantic_kb;
