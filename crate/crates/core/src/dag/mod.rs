//! Ledger data model: payloads, protocol transactions, the per-party DAG with
//! its conflict sets and preference bookkeeping.

mod canonical;
mod graph;
mod payload;
mod tx;

pub use canonical::canonical_text;
pub use graph::{
    ConflictSetKey, CounterStep, Dag, InsertReport, KeyState, MergeReport, Thresholds,
};
pub use payload::{related, validate_payload, Genesis, Ledger, Output, OutputRef, Payload};
pub use tx::{conflicts, ProtocolTransaction};

use crate::ids::{PayloadId, TxId};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DagError {
    #[error("transaction {0} references unknown parent {1}")]
    UnknownParent(TxId, TxId),
    #[error("unknown transaction {0}")]
    UnknownTx(TxId),
    #[error("transaction {0} is already in the DAG")]
    Duplicate(TxId),
    #[error("payload {0} lists input {1:?} twice")]
    DuplicateInput(PayloadId, OutputRef),
    #[error("payload {0} has no outputs")]
    NoOutputs(PayloadId),
}
