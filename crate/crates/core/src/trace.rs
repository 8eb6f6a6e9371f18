//! Structured run log: one JSON object per line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dag::Payload;
use crate::ids::{PartyId, PayloadId, PollId, TxId};
use crate::message::Bit;
use crate::params::ProtocolParams;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceLevel {
    /// Protocol-level records only.
    #[default]
    Protocol,
    /// Adds one record per message send and receipt.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema: u32,
    pub protocol: String,
    pub n: u32,
    pub honest: Vec<PartyId>,
    pub params: ProtocolParams,
    pub seed: u64,
    pub horizon: f64,
    pub adversary: String,
    /// Genesis outputs minted per party.
    #[serde(default)]
    pub genesis: Vec<u32>,
}

/// Counter of the watched transaction around a poll completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Watch {
    pub tx: TxId,
    pub before: u32,
    pub after: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PollOutcome {
    Success,
    Fail,
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    RunStart(RunHeader),
    /// A payload handed to the network, by a user at an honest party or by
    /// the adversary.
    Broadcast {
        party: PartyId,
        tx: Option<TxId>,
        payload: Payload,
    },
    Send {
        from: PartyId,
        to: PartyId,
        msg: String,
        tx: Option<TxId>,
    },
    Recv {
        from: PartyId,
        to: PartyId,
        msg: String,
        tx: Option<TxId>,
    },
    Hear {
        party: PartyId,
        tx: TxId,
    },
    PollStart {
        party: PartyId,
        poll: PollId,
        tx: TxId,
        noop: bool,
        sampled: Vec<PartyId>,
    },
    PollEnd {
        party: PartyId,
        poll: PollId,
        tx: TxId,
        noop: bool,
        outcome: PollOutcome,
        yes: u32,
        no: u32,
        watch: Option<Watch>,
    },
    Deliver {
        party: PartyId,
        tx: TxId,
        payload: PayloadId,
        cnt: u32,
        conflicting: bool,
        parents_accepted: bool,
        /// Completed polls at this party since it first held the transaction.
        polls_since_seen: u64,
        /// Payload-carrying transactions queried since then.
        queries_since_seen: u64,
    },
    AdversaryCraft {
        to: Vec<PartyId>,
        tx: TxId,
        parents: Vec<TxId>,
    },
    Propose {
        party: PartyId,
        value: Option<Bit>,
    },
    SnowRound {
        party: PartyId,
        round: u64,
        sampled: Vec<PartyId>,
        tally: [u32; 2],
        b: Option<Bit>,
        d: [u32; 2],
        cnt: u32,
        decided: bool,
    },
    Decide {
        party: PartyId,
        value: Bit,
    },
    RunEnd {
        events: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    #[serde(flatten)]
    pub ev: Event,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: expected a run_start header")]
    MissingHeader { line: usize },
    #[error("trace has no run_end record; the log is truncated")]
    Truncated,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn write_jsonl<W: Write>(records: &[Record], mut w: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn to_jsonl(records: &[Record]) -> String {
    let mut buf = Vec::new();
    write_jsonl(records, &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf-8")
}

/// Parses a complete run log: header first, `run_end` last.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<Record>, TraceError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|source| TraceError::Parse {
            line: i + 1,
            source,
        })?;
        if out.is_empty() && !matches!(rec.ev, Event::RunStart(_)) {
            return Err(TraceError::MissingHeader { line: i + 1 });
        }
        out.push(rec);
    }
    match out.last() {
        Some(Record {
            ev: Event::RunEnd { .. },
            ..
        }) => Ok(out),
        None => Err(TraceError::MissingHeader { line: 1 }),
        _ => Err(TraceError::Truncated),
    }
}

pub fn header(records: &[Record]) -> Option<&RunHeader> {
    match records.first().map(|r| &r.ev) {
        Some(Event::RunStart(h)) => Some(h),
        _ => None,
    }
}
