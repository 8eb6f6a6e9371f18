use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::payload::Payload;
use crate::ids::TxId;

/// A DAG node: a payload (or the no-op marker) plus parent references.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolTransaction {
    pub id: TxId,
    /// `None` is the no-op marker.
    pub payload: Option<Arc<Payload>>,
    pub parents: Vec<TxId>,
}

impl ProtocolTransaction {
    pub fn new(id: TxId, payload: Arc<Payload>, parents: Vec<TxId>) -> Self {
        ProtocolTransaction {
            id,
            payload: Some(payload),
            parents,
        }
    }

    pub fn noop(id: TxId, parents: Vec<TxId>) -> Self {
        ProtocolTransaction {
            id,
            payload: None,
            parents,
        }
    }

    pub fn is_noop(&self) -> bool {
        self.payload.is_none()
    }

    pub fn genesis(payload: Arc<Payload>) -> Self {
        ProtocolTransaction {
            id: TxId::GENESIS,
            payload: Some(payload),
            parents: Vec::new(),
        }
    }
}

/// Two transactions conflict iff both carry payloads whose inputs intersect.
pub fn conflicts(a: &ProtocolTransaction, b: &ProtocolTransaction) -> bool {
    match (&a.payload, &b.payload) {
        (Some(x), Some(y)) => x.shares_input_with(y),
        _ => false,
    }
}
