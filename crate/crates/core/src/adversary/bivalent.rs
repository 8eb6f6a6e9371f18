//! Attacks that try to keep honest parties split between two values.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::delay::{SECOND_SPEND_DELAY, STEP_SECOND_SPEND};
use super::{broadcast_record, AdvCtx, Adversary, Minter, Replicas};
use crate::dag::ProtocolTransaction;
use crate::ids::PartyId;
use crate::message::{Message, VoteBody};

/// Avalanche split: even-indexed honest parties see T1 first, odd-indexed
/// ones T2 first, and corrupted parties vote as if they preferred whichever
/// spend the querier's side saw first.
pub struct BivalentSplit {
    main: PartyId,
    minter: Minter,
    replicas: Replicas,
    pair: Option<(Arc<ProtocolTransaction>, Arc<ProtocolTransaction>)>,
    first_side: BTreeSet<PartyId>,
}

impl BivalentSplit {
    pub(crate) fn new(main: PartyId, minter: Minter, replicas: Replicas) -> Self {
        BivalentSplit {
            main,
            minter,
            replicas,
            pair: None,
            first_side: BTreeSet::new(),
        }
    }

    fn hand_out(&self, cx: &mut AdvCtx, second: bool) {
        let (t1, t2) = self.pair.clone().expect("prepared");
        for p in cx.honest_ids() {
            let first_side = self.first_side.contains(&p);
            let tx = if first_side != second { &t1 } else { &t2 };
            cx.send(self.main, p, Message::Broadcast(tx.clone()), 0.0);
        }
    }

    /// The querier's own strong-preference vote with the split preference
    /// forced onto the spend pair.
    fn vote(&self, cx: &AdvCtx, querier: PartyId, tx: &ProtocolTransaction) -> Option<VoteBody> {
        let (t1, t2) = self.pair.as_ref()?;
        let party = cx.honest(querier)?.as_avalanche()?;
        let VoteBody::Preference { nonpref, .. } = party.preference_vote(tx)? else {
            return None;
        };
        let (favored, disfavored) = if self.first_side.contains(&querier) {
            (t1.id, t2.id)
        } else {
            (t2.id, t1.id)
        };
        let mut nonpref: BTreeSet<_> = nonpref.into_iter().filter(|t| *t != favored).collect();
        let in_ancestry = tx.id == disfavored
            || tx.parents.iter().any(|p| {
                *p == disfavored
                    || party
                        .dag()
                        .ancestors(*p)
                        .is_ok_and(|a| a.contains(&disfavored))
            });
        if in_ancestry {
            nonpref.insert(disfavored);
        }
        Some(VoteBody::Preference {
            strong: nonpref.is_empty(),
            nonpref: nonpref.into_iter().collect(),
        })
    }
}

impl Adversary for BivalentSplit {
    fn start(&mut self, cx: &mut AdvCtx) {
        let (t1, t2) = self.minter.double_spend();
        self.replicas.learn(&t1);
        self.replicas.learn(&t2);
        cx.record(broadcast_record(self.main, &t1));
        cx.record(broadcast_record(self.main, &t2));
        self.first_side = cx.honest_ids().into_iter().step_by(2).collect();
        self.pair = Some((t1, t2));
        self.hand_out(cx, false);
        cx.schedule(SECOND_SPEND_DELAY, STEP_SECOND_SPEND);
    }

    fn on_message(&mut self, cx: &mut AdvCtx, from: PartyId, to: PartyId, msg: &Message) {
        if let Message::Query { poll, tx } = msg {
            if let Some(body) = self.vote(cx, from, tx) {
                let delay = self.replicas.honest_delay();
                cx.send(
                    to,
                    from,
                    Message::Vote {
                        poll: *poll,
                        tx: tx.id,
                        body,
                    },
                    delay,
                );
                return;
            }
        }
        self.replicas.handle(cx, from, to, msg);
    }

    fn on_step(&mut self, cx: &mut AdvCtx, tag: u64) {
        if tag == STEP_SECOND_SPEND {
            self.hand_out(cx, true);
        }
    }
}

/// Snowball split: corrupted parties never propose and answer every query
/// with the value it carried, reinforcing whatever the querier holds.
pub struct SnowballEcho {
    replicas: Replicas,
}

impl SnowballEcho {
    pub(crate) fn new(replicas: Replicas) -> Self {
        SnowballEcho { replicas }
    }
}

impl Adversary for SnowballEcho {
    fn start(&mut self, _cx: &mut AdvCtx) {}

    fn on_message(&mut self, cx: &mut AdvCtx, from: PartyId, to: PartyId, msg: &Message) {
        if let Message::SnowQuery { round, value } = *msg {
            let delay = self.replicas.honest_delay();
            cx.send(to, from, Message::SnowVote { round, value }, delay);
        }
    }
}
