use avalab_core::analysis::{
    check_consensus, check_counter_thresholds, check_generic_broadcast, safety_holds, CheckError, Verdict,
};
use avalab_core::dag::{Genesis, Output, Payload};
use avalab_core::ids::{PartyId, PayloadId, TxId};
use avalab_core::params::ProtocolParams;
use avalab_core::trace::{Event, Record, RunHeader, SCHEMA_VERSION};
use proptest::prelude::*;

fn header(protocol: &str, n: u32) -> Record {
    Record {
        t: 0.0,
        ev: Event::RunStart(RunHeader {
            schema: SCHEMA_VERSION,
            protocol: protocol.into(),
            n,
            honest: (0..n).map(PartyId).collect(),
            params: ProtocolParams::default(),
            seed: 7,
            horizon: 10.0,
            adversary: "none".into(),
            genesis: vec![4; n as usize],
        }),
    }
}

/// Party `by` spends its genesis output `j`, or output 0 of `from` if given.
fn payload(by: u32, seq: u64, j: u32, from: Option<PayloadId>) -> Payload {
    let g = Genesis::mint(&[4, 4, 4]);
    let input = match from {
        Some(p) => avalab_core::dag::OutputRef { payload: p, index: 0 },
        None => g.output_of(PartyId(by), j).unwrap(),
    };
    Payload::new(
        PayloadId::new(PartyId(by), seq),
        [input],
        vec![Output {
            owner: PartyId(by),
            amount: 1,
        }],
        true,
    )
    .unwrap()
}

fn bcast(t: f64, p: &Payload) -> Record {
    let by = p.id.creator().unwrap();
    Record {
        t,
        ev: Event::Broadcast {
            party: by,
            tx: Some(TxId::new(by, p.id.seq())),
            payload: p.clone(),
        },
    }
}

fn deliver(t: f64, party: u32, p: &Payload, cnt: u32) -> Record {
    Record {
        t,
        ev: Event::Deliver {
            party: PartyId(party),
            tx: TxId::new(p.id.creator().unwrap(), p.id.seq()),
            payload: p.id,
            cnt,
            conflicting: false,
            parents_accepted: true,
            polls_since_seen: cnt as u64,
            queries_since_seen: cnt as u64,
        },
    }
}

fn verdict<'a>(v: &'a [Verdict], name: &str) -> &'a Verdict {
    v.iter().find(|x| x.property == name).unwrap()
}

fn failing(v: &[Verdict]) -> Vec<&str> {
    v.iter().filter(|x| !x.holds).map(|x| x.property.as_str()).collect()
}

#[test]
fn clean_broadcast_trace_passes() {
    let a = payload(0, 0, 0, None);
    let b = payload(1, 0, 0, Some(a.id));
    let mut tr = vec![header("avalanche", 3), bcast(0.1, &a), bcast(0.2, &b)];
    for p in 0..3 {
        tr.push(deliver(1.0, p, &a, 15));
        tr.push(deliver(2.0, p, &b, 15));
    }
    let v = check_generic_broadcast(&tr).unwrap();
    assert!(failing(&v).is_empty(), "{:?}", failing(&v));
    assert!(check_counter_thresholds(&tr).unwrap().holds);
}

#[test]
fn missing_header_is_an_error() {
    let a = payload(0, 0, 0, None);
    assert_eq!(check_generic_broadcast(&[bcast(0.0, &a)]).unwrap_err(), CheckError::MissingHeader);
    assert_eq!(check_consensus(&[]).unwrap_err(), CheckError::MissingHeader);
}

#[test]
fn undelivered_own_broadcast_flags_validity_only_as_liveness() {
    let a = payload(0, 0, 0, None);
    let tr = vec![header("avalanche", 3), bcast(0.1, &a), deliver(1.0, 1, &a, 15)];
    let v = check_generic_broadcast(&tr).unwrap();
    assert_eq!(failing(&v), vec!["validity", "agreement"]);
    assert!(safety_holds(&v));
}

#[test]
fn double_delivery_breaks_integrity() {
    let a = payload(0, 0, 0, None);
    let mut tr = vec![header("avalanche", 1), bcast(0.1, &a)];
    tr.push(deliver(1.0, 0, &a, 15));
    tr.push(deliver(2.0, 0, &a, 15));
    let v = check_generic_broadcast(&tr).unwrap();
    // the second copy also re-spends an already spent input
    assert_eq!(failing(&v), vec!["integrity", "external_validity"]);
    assert!(!safety_holds(&v));
}

#[test]
fn delivery_without_broadcast_breaks_integrity() {
    let a = payload(0, 0, 0, None);
    let tr = vec![header("avalanche", 1), deliver(1.0, 0, &a, 15), bcast(2.0, &a)];
    assert!(!verdict(&check_generic_broadcast(&tr).unwrap(), "integrity").holds);
}

#[test]
fn inverted_related_pair_breaks_partial_order_and_external_validity() {
    let a = payload(0, 0, 0, None);
    let b = payload(1, 0, 0, Some(a.id));
    let mut tr = vec![header("avalanche", 2), bcast(0.1, &a), bcast(0.2, &b)];
    tr.push(deliver(1.0, 0, &a, 15));
    tr.push(deliver(1.1, 0, &b, 15));
    tr.push(deliver(1.2, 1, &b, 15));
    tr.push(deliver(1.3, 1, &a, 15));
    let v = check_generic_broadcast(&tr).unwrap();
    assert_eq!(failing(&v), vec!["partial_order", "external_validity"]);
}

#[test]
fn conflicting_deliveries_break_external_validity() {
    let a = payload(0, 0, 0, None);
    let a2 = payload(0, 1, 0, None);
    let tr = vec![
        header("avalanche", 1),
        bcast(0.1, &a),
        bcast(0.1, &a2),
        deliver(1.0, 0, &a, 150),
        deliver(1.0, 0, &a2, 150),
    ];
    let v = check_generic_broadcast(&tr).unwrap();
    assert_eq!(failing(&v), vec!["external_validity"]);
}

#[test]
fn early_delivery_below_beta1_is_caught() {
    let a = payload(0, 0, 0, None);
    let tr = vec![header("avalanche", 1), bcast(0.1, &a), deliver(1.0, 0, &a, 14)];
    let v = check_counter_thresholds(&tr).unwrap();
    assert!(!v.holds);
    assert_eq!(v.witness.len(), 2);
}

#[test]
fn conflicting_delivery_needs_beta2() {
    let a = payload(0, 0, 0, None);
    let mut rec = deliver(1.0, 0, &a, 15);
    if let Event::Deliver { conflicting, .. } = &mut rec.ev {
        *conflicting = true;
    }
    let tr = vec![header("avalanche", 1), bcast(0.1, &a), rec];
    assert!(!check_counter_thresholds(&tr).unwrap().holds);
}

fn propose(party: u32, value: Option<u8>) -> Record {
    Record {
        t: 0.0,
        ev: Event::Propose {
            party: PartyId(party),
            value,
        },
    }
}

fn decide(t: f64, party: u32, value: u8) -> Record {
    Record {
        t,
        ev: Event::Decide {
            party: PartyId(party),
            value,
        },
    }
}

#[test]
fn consensus_verdicts() {
    let base = vec![header("snowball", 3), propose(0, Some(1)), propose(1, Some(0)), propose(2, None)];
    let mut ok = base.clone();
    ok.extend([decide(1.0, 0, 1), decide(1.0, 1, 1), decide(1.0, 2, 1)]);
    assert!(failing(&check_consensus(&ok).unwrap()).is_empty());

    let mut split = base.clone();
    split.extend([decide(1.0, 0, 1), decide(1.0, 1, 0)]);
    assert_eq!(failing(&check_consensus(&split).unwrap()), vec!["agreement", "termination"]);

    let mut twice = base.clone();
    twice.extend([decide(1.0, 0, 1), decide(2.0, 0, 1), decide(1.0, 1, 1), decide(1.0, 2, 1)]);
    assert_eq!(failing(&check_consensus(&twice).unwrap()), vec!["integrity"]);

    let unanimous = vec![
        header("snowball", 2),
        propose(0, Some(1)),
        propose(1, Some(1)),
        decide(1.0, 0, 0),
        decide(1.0, 1, 1),
    ];
    let v = check_consensus(&unanimous).unwrap();
    assert!(!verdict(&v, "validity").holds);
}

/// A trace of a few related payloads delivered in arbitrary per-party
/// orders, possibly twice or not at all.
fn arbitrary_trace() -> impl Strategy<Value = Vec<Record>> {
    prop::collection::vec(prop::collection::vec(0usize..4, 0..6), 1..4).prop_map(|orders| {
        let a = payload(0, 0, 0, None);
        let b = payload(1, 0, 0, Some(a.id));
        let c = payload(0, 1, 0, None);
        let d = payload(2, 0, 1, None);
        let ps = [a, b, c, d];
        let mut tr = vec![header("avalanche", orders.len() as u32)];
        tr.extend(ps.iter().map(|p| bcast(0.0, p)));
        for (party, order) in orders.iter().enumerate() {
            for (k, &j) in order.iter().enumerate() {
                tr.push(deliver(1.0 + k as f64, party as u32, &ps[j], 15 - (j == 3) as u32));
            }
        }
        tr
    })
}

proptest! {
    #[test]
    fn every_witness_reproduces_its_violation(tr in arbitrary_trace()) {
        let mut all = check_generic_broadcast(&tr).unwrap();
        all.push(check_counter_thresholds(&tr).unwrap());
        for v in all.iter().filter(|v| !v.holds) {
            let mut again = check_generic_broadcast(&v.witness).unwrap();
            again.push(check_counter_thresholds(&v.witness).unwrap());
            prop_assert!(!verdict(&again, &v.property).holds, "{} witness does not reproduce", v.property);
        }
    }
}
