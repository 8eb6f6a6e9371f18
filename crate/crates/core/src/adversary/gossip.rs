use super::delay::{Crafting, STEP_SECOND_SPEND};
use super::{AdvCtx, Adversary};
use crate::ids::{PartyId, PayloadId};
use crate::message::Message;

/// Keeps a fraction `gamma` of the fresh transactions every honest party sees
/// malicious: for each honest payload heard from the target on, credit
/// `gamma / (1 - gamma)` crafted transactions and gossip them to everyone.
pub struct GossipAttack {
    core: Crafting,
    gamma: f64,
    credit: f64,
    heard: std::collections::BTreeSet<PayloadId>,
    crafted: u64,
}

impl GossipAttack {
    pub(crate) fn new(core: Crafting, gamma: f64) -> Self {
        GossipAttack {
            core,
            gamma,
            credit: 0.0,
            heard: Default::default(),
            crafted: 0,
        }
    }

    pub fn crafted(&self) -> u64 {
        self.crafted
    }
}

impl Adversary for GossipAttack {
    fn start(&mut self, cx: &mut AdvCtx) {
        self.core.prepare(cx);
    }

    fn on_message(&mut self, cx: &mut AdvCtx, from: PartyId, to: PartyId, msg: &Message) {
        self.core.on_message(cx, from, to, msg);
        if to != self.core.main || self.gamma <= 0.0 {
            return;
        }
        let Message::Broadcast(tx) = msg else { return };
        let Some(p) = &tx.payload else { return };
        if self.core.target.is_none() || p.id.creator() == Some(self.core.main) || !self.heard.insert(p.id) {
            return;
        }
        self.credit += self.gamma / (1.0 - self.gamma);
        let honest = cx.honest_ids();
        while self.credit >= 1.0 {
            self.credit -= 1.0;
            self.core.strike(cx, &honest);
            self.crafted += 1;
        }
    }

    fn on_step(&mut self, cx: &mut AdvCtx, tag: u64) {
        if tag == STEP_SECOND_SPEND {
            self.core.send_second_spend(cx);
        }
    }
}
