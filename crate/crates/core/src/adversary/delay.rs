//! Targeted counter-reset attack and the shared machinery of the
//! transaction-crafting strategies.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{broadcast_record, AdvCtx, Adversary, Minter, Replicas};
use crate::dag::ProtocolTransaction;
use crate::ids::{PartyId, PayloadId, TxId};
use crate::message::Message;
use crate::trace::Event;

pub(crate) const STEP_SECOND_SPEND: u64 = 1;
pub(crate) const STEP_HEURISTIC: u64 = 2;

/// Gap between the two halves of the double spend.
pub(crate) const SECOND_SPEND_DELAY: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TriggerMode {
    /// Read the victim's counter and strike when it reaches `floor(beta1 / 2)`.
    Oracle,
    /// No privileged reads: strike every `interval` seconds once the target is known.
    Heuristic { interval: f64 },
}

/// State common to the delay and gossip attacks: the double spend, the
/// target and every transaction seen carrying its payload.
pub(crate) struct Crafting {
    pub main: PartyId,
    pub target_payload: PayloadId,
    pub minter: Minter,
    pub replicas: Replicas,
    pub t1: Option<Arc<ProtocolTransaction>>,
    pub t2: Option<Arc<ProtocolTransaction>>,
    pub target: Option<TxId>,
    /// Transactions carrying the target payload.
    pub carriers: BTreeSet<TxId>,
}

impl Crafting {
    pub fn new(main: PartyId, target_payload: PayloadId, minter: Minter, replicas: Replicas) -> Self {
        Crafting {
            main,
            target_payload,
            minter,
            replicas,
            t1: None,
            t2: None,
            target: None,
            carriers: BTreeSet::new(),
        }
    }

    /// Creates the double spend and hands the first half to every honest party.
    pub fn prepare(&mut self, cx: &mut AdvCtx) {
        let (t1, t2) = self.minter.double_spend();
        self.replicas.learn(&t1);
        self.replicas.learn(&t2);
        cx.record(broadcast_record(self.main, &t1));
        for p in cx.honest_ids() {
            cx.send(self.main, p, Message::Broadcast(t1.clone()), 0.0);
        }
        cx.schedule(SECOND_SPEND_DELAY, STEP_SECOND_SPEND);
        self.t1 = Some(t1);
        self.t2 = Some(t2);
    }

    pub fn send_second_spend(&mut self, cx: &mut AdvCtx) {
        let t2 = self.t2.clone().expect("prepared");
        cx.record(broadcast_record(self.main, &t2));
        for p in cx.honest_ids() {
            cx.send(self.main, p, Message::Broadcast(t2.clone()), 0.0);
        }
    }

    /// Registers `tx` if it carries the target payload.
    pub fn observe(&mut self, tx: &ProtocolTransaction) {
        let Some(p) = &tx.payload else { return };
        if p.id != self.target_payload {
            return;
        }
        if self.target.is_none() {
            self.target = Some(tx.id);
        }
        self.carriers.insert(tx.id);
    }

    /// Crafts a fresh transaction below the losing spend and every carrier of
    /// the target payload, and sends it to `to` without delay.
    pub fn strike(&mut self, cx: &mut AdvCtx, to: &[PartyId]) -> TxId {
        let t2 = self.t2.as_ref().expect("prepared").id;
        let mut parents: Vec<TxId> = std::iter::once(t2).chain(self.carriers.iter().copied()).collect();
        parents.sort_unstable();
        parents.dedup();
        let payload = self.minter.fresh_payload(1);
        let tx = self.minter.wrap(payload, parents.clone());
        cx.record(Event::AdversaryCraft {
            to: to.to_vec(),
            tx: tx.id,
            parents,
        });
        cx.record(broadcast_record(self.main, &tx));
        for &p in to {
            cx.send(self.main, p, Message::Broadcast(tx.clone()), 0.0);
        }
        tx.id
    }

    pub fn on_message(&mut self, cx: &mut AdvCtx, from: PartyId, to: PartyId, msg: &Message) {
        if let Message::Broadcast(tx) = msg {
            self.observe(tx);
        }
        self.replicas.handle(cx, from, to, msg);
    }
}

/// Delays one victim's acceptance of one target transaction by resetting
/// its counter whenever it gets halfway to the early threshold.
pub struct DelayAttack {
    core: Crafting,
    victim: PartyId,
    trigger: u32,
    mode: TriggerMode,
    last_cnt: Option<u32>,
    strikes: u64,
}

impl DelayAttack {
    pub(crate) fn new(core: Crafting, victim: PartyId, beta1: u32, mode: TriggerMode) -> Self {
        DelayAttack {
            core,
            victim,
            trigger: beta1 / 2,
            mode,
            last_cnt: None,
            strikes: 0,
        }
    }

    pub fn strikes(&self) -> u64 {
        self.strikes
    }

    fn strike(&mut self, cx: &mut AdvCtx) {
        self.core.strike(cx, &[self.victim]);
        self.strikes += 1;
    }
}

impl Adversary for DelayAttack {
    fn start(&mut self, cx: &mut AdvCtx) {
        self.core.prepare(cx);
        if let TriggerMode::Heuristic { interval } = self.mode {
            cx.schedule(interval, STEP_HEURISTIC);
        }
    }

    fn on_message(&mut self, cx: &mut AdvCtx, from: PartyId, to: PartyId, msg: &Message) {
        self.core.on_message(cx, from, to, msg);
    }

    fn on_step(&mut self, cx: &mut AdvCtx, tag: u64) {
        match tag {
            STEP_SECOND_SPEND => self.core.send_second_spend(cx),
            STEP_HEURISTIC => {
                if self.core.target.is_some() {
                    self.strike(cx);
                }
                if let TriggerMode::Heuristic { interval } = self.mode {
                    cx.schedule(interval, STEP_HEURISTIC);
                }
            }
            _ => {}
        }
    }

    fn watches_events(&self) -> bool {
        self.mode == TriggerMode::Oracle
    }

    fn after_event(&mut self, cx: &mut AdvCtx, party: PartyId) {
        if party != self.victim {
            return;
        }
        let Some(victim) = cx.honest(self.victim).and_then(|h| h.as_avalanche()) else {
            return;
        };
        if self.core.target.is_none() {
            // privileged read: the victim already holds the target before
            // its gossip reaches us
            if let Some(t) = victim.watched() {
                if let Some(tx) = victim.dag().get(t) {
                    let tx = tx.clone();
                    self.core.observe(&tx);
                }
            }
        }
        let Some(target) = self.core.target else {
            return;
        };
        let cnt = victim.cnt_of(target);
        if victim.dag().is_accepted(target).unwrap_or(false) {
            self.last_cnt = cnt;
            return;
        }
        if cnt == Some(self.trigger) && self.last_cnt != cnt {
            self.strike(cx);
        }
        self.last_cnt = cnt;
    }
}
