//! UTXO payloads, the relatedness relation and the external validity predicate.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DagError;
use crate::ids::{PartyId, PayloadId};

/// Position in the output list of a payload.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OutputRef {
    pub payload: PayloadId,
    pub index: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Output {
    pub owner: PartyId,
    pub amount: u64,
}

/// A user-level value transfer. `auth_valid` stands in for every cryptographic
/// requirement of the payload.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payload {
    pub id: PayloadId,
    pub inputs: BTreeSet<OutputRef>,
    pub outputs: Vec<Output>,
    pub auth_valid: bool,
}

impl Payload {
    /// Builds a payload, rejecting duplicate inputs and empty outputs.
    pub fn new(
        id: PayloadId,
        inputs: impl IntoIterator<Item = OutputRef>,
        outputs: Vec<Output>,
        auth_valid: bool,
    ) -> Result<Self, DagError> {
        let mut set = BTreeSet::new();
        for input in inputs {
            if !set.insert(input) {
                return Err(DagError::DuplicateInput(id, input));
            }
        }
        if outputs.is_empty() {
            return Err(DagError::NoOutputs(id));
        }
        Ok(Payload {
            id,
            inputs: set,
            outputs,
            auth_valid,
        })
    }

    /// True iff this payload consumes some output of `other`.
    pub fn consumes_output_of(&self, other: &Payload) -> bool {
        self.inputs
            .iter()
            .any(|r| r.payload == other.id && (r.index as usize) < other.outputs.len())
    }

    pub fn shares_input_with(&self, other: &Payload) -> bool {
        // inputs are sorted sets; walk both
        let mut a = self.inputs.iter().peekable();
        let mut b = other.inputs.iter().peekable();
        while let (Some(x), Some(y)) = (a.peek(), b.peek()) {
            match x.cmp(y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }
}

/// Two payloads are related when one consumes an output of the other.
pub fn related(a: &Payload, b: &Payload) -> bool {
    a.consumes_output_of(b) || b.consumes_output_of(a)
}

/// Genesis payload plus the split of its outputs among parties.
#[derive(Clone, Debug)]
pub struct Genesis {
    pub payload: Arc<Payload>,
    allocation: Vec<Range<u32>>,
}

impl Genesis {
    /// Mints `per_party[p]` unit outputs owned by party `p`.
    pub fn mint(per_party: &[u32]) -> Self {
        let mut outputs = Vec::new();
        let mut allocation = Vec::with_capacity(per_party.len());
        for (p, &count) in per_party.iter().enumerate() {
            let start = outputs.len() as u32;
            outputs.extend((0..count).map(|_| Output {
                owner: PartyId(p as u32),
                amount: 1,
            }));
            allocation.push(start..start + count);
        }
        if outputs.is_empty() {
            outputs.push(Output {
                owner: PartyId(0),
                amount: 0,
            });
        }
        let payload = Payload {
            id: PayloadId::GENESIS,
            inputs: BTreeSet::new(),
            outputs,
            auth_valid: true,
        };
        Genesis {
            payload: Arc::new(payload),
            allocation,
        }
    }

    /// The `j`-th genesis output owned by `party`, if minted.
    pub fn output_of(&self, party: PartyId, j: u32) -> Option<OutputRef> {
        let range = self.allocation.get(party.0 as usize)?;
        let index = range.start.checked_add(j)?;
        (index < range.end).then_some(OutputRef {
            payload: PayloadId::GENESIS,
            index,
        })
    }

    pub fn outputs_of(&self, party: PartyId) -> u32 {
        self.allocation
            .get(party.0 as usize)
            .map_or(0, |r| r.end - r.start)
    }
}

/// One party's view of delivered payloads: which outputs exist and which are spent.
#[derive(Clone, Debug, Default)]
pub struct Ledger {
    created: HashMap<PayloadId, u32>,
    spent: HashSet<OutputRef>,
    delivered: Vec<PayloadId>,
}

impl Ledger {
    pub fn with_genesis(genesis: &Payload) -> Self {
        let mut ledger = Ledger::default();
        ledger
            .created
            .insert(genesis.id, genesis.outputs.len() as u32);
        ledger
    }

    pub fn output_exists(&self, r: &OutputRef) -> bool {
        self.created.get(&r.payload).is_some_and(|&n| r.index < n)
    }

    pub fn is_spent(&self, r: &OutputRef) -> bool {
        self.spent.contains(r)
    }

    pub fn is_delivered(&self, id: PayloadId) -> bool {
        self.created.contains_key(&id)
    }

    /// Payload ids in delivery order (genesis excluded).
    pub fn delivered(&self) -> &[PayloadId] {
        &self.delivered
    }

    /// Records a delivery. Callers check [`validate_payload`] first.
    pub fn apply(&mut self, p: &Payload) {
        self.spent.extend(p.inputs.iter().copied());
        self.created.insert(p.id, p.outputs.len() as u32);
        self.delivered.push(p.id);
    }
}

/// External validity: authenticated, every input is an existing delivered
/// output, and no delivered payload already consumed any of the inputs.
pub fn validate_payload(p: &Payload, ledger: &Ledger) -> bool {
    p.auth_valid
        && !ledger.is_delivered(p.id)
        && p
            .inputs
            .iter()
            .all(|r| ledger.output_exists(r) && !ledger.is_spent(r))
}
