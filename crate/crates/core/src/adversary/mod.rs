//! Attack strategies. An adversary controls every corrupted party, schedules
//! its own messages with arbitrary delays and may read honest state.

mod bivalent;
mod delay;
mod gossip;

pub use bivalent::{BivalentSplit, SnowballEcho};
pub(crate) use delay::Crafting;
pub use delay::{DelayAttack, TriggerMode};
pub use gossip::GossipAttack;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::dag::{Genesis, Output, Payload, ProtocolTransaction};
use crate::effect::{Effect, Outbox};
use crate::ids::{PartyId, PayloadId, TxId};
use crate::message::Message;
use crate::party::{AvalancheParty, PartySetup};
use crate::sim::world::Honest;
use crate::trace::Event;

#[derive(Clone, Debug)]
pub enum AdvEffect {
    Send {
        from: PartyId,
        to: PartyId,
        msg: Message,
        delay: f64,
    },
    Step {
        after: f64,
        tag: u64,
    },
    Record(Event),
}

/// Adversary view of the world during one callback.
pub struct AdvCtx<'a> {
    pub now: f64,
    parties: &'a [Option<Honest>],
    effects: Vec<AdvEffect>,
}

impl<'a> AdvCtx<'a> {
    pub fn new(now: f64, parties: &'a [Option<Honest>]) -> Self {
        AdvCtx {
            now,
            parties,
            effects: Vec::new(),
        }
    }

    pub fn into_effects(self) -> Vec<AdvEffect> {
        self.effects
    }

    /// Privileged read of an honest party.
    pub fn honest(&self, id: PartyId) -> Option<&'a Honest> {
        self.parties.get(id.0 as usize)?.as_ref()
    }

    pub fn honest_ids(&self) -> Vec<PartyId> {
        (0..self.parties.len() as u32)
            .map(PartyId)
            .filter(|p| self.parties[p.0 as usize].is_some())
            .collect()
    }

    pub fn send(&mut self, from: PartyId, to: PartyId, msg: Message, delay: f64) {
        self.effects.push(AdvEffect::Send {
            from,
            to,
            msg,
            delay,
        });
    }

    pub fn schedule(&mut self, after: f64, tag: u64) {
        self.effects.push(AdvEffect::Step { after, tag });
    }

    pub fn record(&mut self, ev: Event) {
        self.effects.push(AdvEffect::Record(ev));
    }
}

pub trait Adversary {
    fn start(&mut self, cx: &mut AdvCtx);

    /// A message addressed to corrupted party `to`.
    fn on_message(&mut self, cx: &mut AdvCtx, from: PartyId, to: PartyId, msg: &Message);

    fn on_step(&mut self, _cx: &mut AdvCtx, _tag: u64) {}

    /// Whether [`Adversary::after_event`] should run after every honest event.
    fn watches_events(&self) -> bool {
        false
    }

    /// Called after honest party `party` handled an event.
    fn after_event(&mut self, _cx: &mut AdvCtx, _party: PartyId) {}
}

/// Passive Avalanche replicas standing in for corrupted parties: they learn
/// gossip and answer queries like honest parties, with honest-looking delays.
pub struct Replicas {
    parties: BTreeMap<PartyId, AvalancheParty>,
    rng: ChaCha8Rng,
    delay: Exp<f64>,
}

impl Replicas {
    pub fn new(setups: Vec<PartySetup>, rng: ChaCha8Rng, lambda: f64) -> Self {
        Replicas {
            parties: setups
                .into_iter()
                .map(|s| {
                    let id = s.id;
                    (
                        id,
                        AvalancheParty::new(PartySetup {
                            passive: true,
                            shadow: false,
                            ..s
                        }),
                    )
                })
                .collect(),
            rng,
            delay: Exp::new(lambda).expect("lambda validated positive"),
        }
    }

    pub fn get(&self, id: PartyId) -> Option<&AvalancheParty> {
        self.parties.get(&id)
    }

    pub fn honest_delay(&mut self) -> f64 {
        self.delay.sample(&mut self.rng)
    }

    /// Lets every replica learn `tx` without network delay.
    pub fn learn(&mut self, tx: &Arc<ProtocolTransaction>) {
        let mut sink = Outbox::default();
        for r in self.parties.values_mut() {
            r.on_message(PartyId(u32::MAX), &Message::Broadcast(tx.clone()), &mut sink);
        }
    }

    /// Feeds `msg` to replica `to` and forwards its replies.
    pub fn handle(&mut self, cx: &mut AdvCtx, from: PartyId, to: PartyId, msg: &Message) {
        let Some(r) = self.parties.get_mut(&to) else {
            return;
        };
        let mut out = Outbox::default();
        r.on_message(from, msg, &mut out);
        for eff in out.drain() {
            if let Effect::Send { to: dest, msg } = eff {
                let d = self.delay.sample(&mut self.rng);
                cx.send(to, dest, msg, d);
            }
        }
    }
}

/// Factory for adversary-owned payloads and transactions.
pub struct Minter {
    pub owner: PartyId,
    genesis: Genesis,
    next_output: u32,
    next_payload: u64,
    next_tx: u64,
}

impl Minter {
    pub fn new(owner: PartyId, genesis: Genesis) -> Self {
        Minter {
            owner,
            genesis,
            next_output: 0,
            next_payload: 0,
            next_tx: 0,
        }
    }

    /// A payload spending the next unused genesis output of the owner.
    pub fn fresh_payload(&mut self, amount: u64) -> Arc<Payload> {
        let input = self
            .genesis
            .output_of(self.owner, self.next_output)
            .expect("adversary genesis allocation exhausted");
        self.next_output += 1;
        self.payload_spending(input, amount)
    }

    pub fn payload_spending(&mut self, input: crate::dag::OutputRef, amount: u64) -> Arc<Payload> {
        let id = PayloadId::new(self.owner, self.next_payload);
        self.next_payload += 1;
        Arc::new(
            Payload::new(
                id,
                [input],
                vec![Output {
                    owner: self.owner,
                    amount,
                }],
                true,
            )
            .expect("single input, one output"),
        )
    }

    pub fn wrap(&mut self, payload: Arc<Payload>, parents: Vec<TxId>) -> Arc<ProtocolTransaction> {
        let id = TxId::new(self.owner, self.next_tx);
        self.next_tx += 1;
        Arc::new(ProtocolTransaction::new(id, payload, parents))
    }

    /// Two transactions spending the same fresh output.
    pub fn double_spend(&mut self) -> (Arc<ProtocolTransaction>, Arc<ProtocolTransaction>) {
        let input = self
            .genesis
            .output_of(self.owner, self.next_output)
            .expect("adversary genesis allocation exhausted");
        self.next_output += 1;
        let p1 = self.payload_spending(input, 1);
        let p2 = self.payload_spending(input, 2);
        let t1 = self.wrap(p1, vec![TxId::GENESIS]);
        let t2 = self.wrap(p2, vec![TxId::GENESIS]);
        (t1, t2)
    }
}

pub(crate) fn broadcast_record(party: PartyId, tx: &ProtocolTransaction) -> Event {
    Event::Broadcast {
        party,
        tx: Some(tx.id),
        payload: (*tx.payload.clone().expect("adversary transactions carry payloads")).clone(),
    }
}

/// Corrupted parties that simply behave like passive honest replicas.
pub struct Bystanders {
    replicas: Replicas,
}

impl Bystanders {
    pub fn new(replicas: Replicas) -> Self {
        Bystanders { replicas }
    }
}

impl Adversary for Bystanders {
    fn start(&mut self, _cx: &mut AdvCtx) {}

    fn on_message(&mut self, cx: &mut AdvCtx, from: PartyId, to: PartyId, msg: &Message) {
        self.replicas.handle(cx, from, to, msg);
    }
}
