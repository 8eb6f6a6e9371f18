//! Identifier newtypes shared across the crate.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Index of a party in `0..n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u32);

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

const SEQ_BITS: u32 = 40;
const SEQ_MASK: u64 = (1 << SEQ_BITS) - 1;

/// Creator-scoped identifier: the high bits carry the creating party (plus one,
/// so that zero is reserved for genesis), the low bits a per-creator sequence.
macro_rules! scoped_id {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl $name {
            pub const GENESIS: $name = $name(0);

            pub fn new(creator: PartyId, seq: u64) -> Self {
                debug_assert!(seq <= SEQ_MASK);
                $name(((creator.0 as u64 + 1) << SEQ_BITS) | (seq & SEQ_MASK))
            }

            /// Party that minted this id, `None` for genesis.
            pub fn creator(self) -> Option<PartyId> {
                match self.0 >> SEQ_BITS {
                    0 => None,
                    c => Some(PartyId((c - 1) as u32)),
                }
            }

            pub fn seq(self) -> u64 {
                self.0 & SEQ_MASK
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match self.creator() {
                    None => write!(f, concat!($prefix, "genesis")),
                    Some(p) => write!(f, concat!($prefix, "{}.{}"), p.0, self.seq()),
                }
            }
        }
    };
}

scoped_id!(TxId, "T");
scoped_id!(PayloadId, "tx");

/// Identifier of a single poll instance at its initiating party.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PollId(pub u64);
