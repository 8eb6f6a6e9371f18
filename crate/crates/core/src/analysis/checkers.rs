//! Trace checkers for the generic-broadcast and consensus properties and for
//! the acceptance-counter thresholds.
//!
//! Each violated verdict carries a witness: the run header followed by the
//! offending records in trace order. Running the same checker on the witness
//! alone reports the same violation.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::dag::{validate_payload, Genesis, Ledger, Payload};
use crate::ids::{PartyId, PayloadId};
use crate::message::Bit;
use crate::trace::{header, Event, Record, RunHeader};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PropertyKind {
    Safety,
    /// Only meaningful up to the run horizon; a failure is a flag, not a proof.
    Liveness { horizon: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub property: String,
    pub kind: PropertyKind,
    pub holds: bool,
    pub witness: Vec<Record>,
}

impl Verdict {
    fn new(property: &str, kind: PropertyKind, hdr: &Record, offending: Option<Vec<usize>>, records: &[Record]) -> Self {
        let witness = match offending {
            None => Vec::new(),
            Some(mut idx) => {
                idx.sort_unstable();
                idx.dedup();
                std::iter::once(hdr.clone())
                    .chain(idx.into_iter().filter(|&i| i != 0).map(|i| records[i].clone()))
                    .collect()
            }
        };
        Verdict {
            property: property.to_string(),
            kind,
            holds: witness.is_empty(),
            witness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error("trace does not start with a run header")]
    MissingHeader,
}

/// True iff every safety verdict holds.
pub fn safety_holds(verdicts: &[Verdict]) -> bool {
    verdicts
        .iter()
        .all(|v| v.holds || v.kind != PropertyKind::Safety)
}

fn start(records: &[Record]) -> Result<(&RunHeader, BTreeSet<PartyId>), CheckError> {
    let h = header(records).ok_or(CheckError::MissingHeader)?;
    Ok((h, h.honest.iter().copied().collect()))
}

struct Deliveries {
    /// Per party, (payload, record index) in delivery order.
    by_party: BTreeMap<PartyId, Vec<(PayloadId, usize)>>,
    /// Payload contents and the index of their first broadcast record.
    broadcast: HashMap<PayloadId, (Payload, usize)>,
}

fn collect(records: &[Record]) -> Deliveries {
    let mut d = Deliveries {
        by_party: BTreeMap::new(),
        broadcast: HashMap::new(),
    };
    for (i, r) in records.iter().enumerate() {
        match &r.ev {
            Event::Broadcast { payload, .. } => {
                d.broadcast
                    .entry(payload.id)
                    .or_insert_with(|| (payload.clone(), i));
            }
            Event::Deliver { party, payload, .. } => {
                d.by_party.entry(*party).or_default().push((*payload, i));
            }
            _ => {}
        }
    }
    d
}

/// Validity, agreement, integrity, partial order and external validity of
/// generic broadcast over the relation "one payload spends an output of the
/// other". Validity and agreement are liveness flags up to the horizon.
pub fn check_generic_broadcast(records: &[Record]) -> Result<Vec<Verdict>, CheckError> {
    let (h, honest) = start(records)?;
    let hdr = &records[0];
    let live = PropertyKind::Liveness { horizon: h.horizon };
    let d = collect(records);

    // validity: an honest broadcast is delivered by its own party
    let mut validity = None;
    for (i, r) in records.iter().enumerate() {
        if let Event::Broadcast {
            party,
            tx: Some(_),
            payload,
        } = &r.ev
        {
            if !honest.contains(party) {
                continue;
            }
            let delivered = d
                .by_party
                .get(party)
                .is_some_and(|v| v.iter().any(|(p, _)| *p == payload.id));
            if !delivered {
                validity = Some(vec![i]);
                break;
            }
        }
    }

    // agreement: what one honest party delivers, every honest party delivers
    let mut agreement = None;
    'agree: for (party, list) in &d.by_party {
        if !honest.contains(party) {
            continue;
        }
        for &(p, i) in list {
            let missing = honest.iter().any(|q| {
                !d.by_party
                    .get(q)
                    .is_some_and(|v| v.iter().any(|(x, _)| *x == p))
            });
            if missing {
                agreement = Some(vec![i]);
                break 'agree;
            }
        }
    }

    // integrity: at most once, and only after a broadcast
    let mut integrity = None;
    'integrity: for list in d.by_party.values() {
        let mut first: HashMap<PayloadId, usize> = HashMap::new();
        for &(p, i) in list {
            match d.broadcast.get(&p) {
                Some(&(_, b)) if b < i => {}
                _ => {
                    integrity = Some(vec![i]);
                    break 'integrity;
                }
            }
            if let Some(&j) = first.get(&p) {
                integrity = Some(vec![d.broadcast[&p].1, j, i]);
                break 'integrity;
            }
            first.insert(p, i);
        }
    }

    // partial order: related pairs are delivered in the same relative order
    let mut partial_order = None;
    let mut first_seen: HashMap<(PayloadId, PayloadId), (usize, usize)> = HashMap::new();
    'order: for list in d.by_party.values() {
        let pos: HashMap<PayloadId, usize> = list.iter().copied().collect();
        for &(child, ci) in list {
            let Some((payload, _)) = d.broadcast.get(&child) else { continue };
            for input in &payload.inputs {
                let parent = input.payload;
                let Some(&pi) = pos.get(&parent) else { continue };
                match first_seen.get(&(parent, child)) {
                    None => {
                        first_seen.insert((parent, child), (pi, ci));
                    }
                    Some(&(x, y)) if (x < y) != (pi < ci) => {
                        let mut w = vec![x, y, pi, ci, d.broadcast[&child].1];
                        w.extend(d.broadcast.get(&parent).map(|b| b.1));
                        partial_order = Some(w);
                        break 'order;
                    }
                    Some(_) => {}
                }
            }
        }
    }

    // external validity: replay each party's deliveries against its own ledger
    let mut external = None;
    let genesis = Genesis::mint(&h.genesis);
    'ext: for list in d.by_party.values() {
        let mut ledger = Ledger::with_genesis(&genesis.payload);
        let mut so_far = Vec::new();
        for &(p, i) in list {
            let Some((payload, b)) = d.broadcast.get(&p) else { continue };
            so_far.push(*b);
            so_far.push(i);
            if !validate_payload(payload, &ledger) {
                external = Some(so_far);
                break 'ext;
            }
            ledger.apply(payload);
        }
    }

    Ok(vec![
        Verdict::new("validity", live, hdr, validity, records),
        Verdict::new("agreement", live, hdr, agreement, records),
        Verdict::new("integrity", PropertyKind::Safety, hdr, integrity, records),
        Verdict::new("partial_order", PropertyKind::Safety, hdr, partial_order, records),
        Verdict::new("external_validity", PropertyKind::Safety, hdr, external, records),
    ])
}

/// Every delivery happened with the counter at the threshold that licenses
/// it: `beta1` with accepted parents for a lone transaction, `beta2` otherwise.
pub fn check_counter_thresholds(records: &[Record]) -> Result<Verdict, CheckError> {
    let (h, _) = start(records)?;
    let (b1, b2) = (h.params.beta1, h.params.beta2);
    let bad = records.iter().position(|r| {
        matches!(r.ev, Event::Deliver { cnt, conflicting, parents_accepted, .. }
            if !(cnt >= b2 || (!conflicting && parents_accepted && cnt >= b1)))
    });
    Ok(Verdict::new(
        "counter_thresholds",
        PropertyKind::Safety,
        &records[0],
        bad.map(|i| vec![i]),
        records,
    ))
}

/// Validity, integrity and agreement of binary consensus, plus termination
/// up to the horizon.
pub fn check_consensus(records: &[Record]) -> Result<Vec<Verdict>, CheckError> {
    let (h, honest) = start(records)?;
    let hdr = &records[0];
    let mut proposals: BTreeMap<PartyId, (Option<Bit>, usize)> = BTreeMap::new();
    let mut decides: BTreeMap<PartyId, Vec<(Bit, usize)>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        match r.ev {
            Event::Propose { party, value } => {
                proposals.entry(party).or_insert((value, i));
            }
            Event::Decide { party, value } => decides.entry(party).or_default().push((value, i)),
            _ => {}
        }
    }
    let proposed: BTreeSet<Bit> = proposals.values().filter_map(|(v, _)| *v).collect();

    let mut validity = None;
    let unanimous = proposals.len() == honest.len()
        && proposed.len() == 1
        && proposals.values().all(|(v, _)| v.is_some());
    for list in decides.values() {
        for &(v, i) in list {
            if !proposed.contains(&v) {
                validity = Some(vec![i]);
            } else if unanimous && Some(&v) != proposed.iter().next() {
                let mut w: Vec<usize> = proposals.values().map(|(_, j)| *j).collect();
                w.push(i);
                validity = Some(w);
            }
            if validity.is_some() {
                break;
            }
        }
        if validity.is_some() {
            break;
        }
    }

    let integrity = decides
        .values()
        .find(|l| l.len() > 1)
        .map(|l| l.iter().map(|(_, i)| *i).collect());

    let mut agreement = None;
    let mut first: Option<(Bit, usize)> = None;
    'agree: for list in decides.values() {
        for &(v, i) in list {
            match first {
                None => first = Some((v, i)),
                Some((w, j)) if w != v => {
                    agreement = Some(vec![j, i]);
                    break 'agree;
                }
                _ => {}
            }
        }
    }

    let termination = honest
        .iter()
        .any(|p| !decides.contains_key(p))
        .then(|| decides.values().flatten().map(|(_, i)| *i).collect::<Vec<_>>());

    Ok(vec![
        Verdict::new("validity", PropertyKind::Safety, hdr, validity, records),
        Verdict::new("integrity", PropertyKind::Safety, hdr, integrity, records),
        Verdict::new("agreement", PropertyKind::Safety, hdr, agreement, records),
        Verdict::new(
            "termination",
            PropertyKind::Liveness { horizon: h.horizon },
            hdr,
            termination,
            records,
        ),
    ])
}
