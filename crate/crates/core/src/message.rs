//! Wire messages exchanged between parties.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dag::ProtocolTransaction;
use crate::ids::{PollId, TxId};

/// Binary Snowball value.
pub type Bit = u8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum VoteBody {
    /// Avalanche and Glacier: the strong-preference bit plus the members of
    /// the queried ancestry (self included) that are not preferred.
    Preference { strong: bool, nonpref: Vec<TxId> },
    /// Deployed variant: the replier's virtuous frontier.
    Frontier { frontier: Vec<TxId> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Broadcast(Arc<ProtocolTransaction>),
    Query {
        poll: PollId,
        tx: Arc<ProtocolTransaction>,
    },
    Vote {
        poll: PollId,
        tx: TxId,
        body: VoteBody,
    },
    SnowQuery {
        round: u64,
        value: Bit,
    },
    SnowVote {
        round: u64,
        value: Bit,
    },
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Broadcast(_) => "broadcast",
            Message::Query { .. } => "query",
            Message::Vote { .. } => "vote",
            Message::SnowQuery { .. } => "snow_query",
            Message::SnowVote { .. } => "snow_vote",
        }
    }

    /// The transaction the message is about, if any.
    pub fn tx(&self) -> Option<TxId> {
        match self {
            Message::Broadcast(t) | Message::Query { tx: t, .. } => Some(t.id),
            Message::Vote { tx, .. } => Some(*tx),
            _ => None,
        }
    }
}
