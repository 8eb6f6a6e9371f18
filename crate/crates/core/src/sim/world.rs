use std::collections::HashMap;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use super::net::{DelayModel, NetworkConfig};
use super::queue::{Class, EventQueue};
use super::rng::{party_stream, Stream};
use crate::adversary::{AdvCtx, AdvEffect, Adversary};
use crate::dag::Payload;
use crate::effect::{Effect, Outbox};
use crate::ids::PartyId;
use crate::message::{Bit, Message};
use crate::party::AvalancheParty;
use crate::snowball::SnowballParty;
use crate::trace::{Event, Record, RunHeader, TraceLevel};

/// An honest party of either protocol family.
pub enum Honest {
    Avalanche(Box<AvalancheParty>),
    Snowball(Box<SnowballParty>),
}

impl Honest {
    pub fn as_avalanche(&self) -> Option<&AvalancheParty> {
        match self {
            Honest::Avalanche(p) => Some(p),
            Honest::Snowball(_) => None,
        }
    }

    pub fn as_avalanche_mut(&mut self) -> Option<&mut AvalancheParty> {
        match self {
            Honest::Avalanche(p) => Some(p),
            Honest::Snowball(_) => None,
        }
    }

    pub fn as_snowball(&self) -> Option<&SnowballParty> {
        match self {
            Honest::Snowball(p) => Some(p),
            Honest::Avalanche(_) => None,
        }
    }
}

#[derive(Debug)]
enum Ev {
    Deliver {
        from: PartyId,
        to: PartyId,
        msg: Message,
    },
    Timer {
        party: PartyId,
        key: u64,
        generation: u64,
    },
    UserBroadcast {
        party: PartyId,
        payload: Arc<Payload>,
    },
    Propose {
        party: PartyId,
        value: Option<Bit>,
    },
    AdversaryStep {
        tag: u64,
    },
}

/// The deterministic discrete-event world: parties, network, adversary, log.
pub struct World {
    now: f64,
    queue: EventQueue<Ev>,
    /// Indexed by party id; `None` for corrupted parties.
    parties: Vec<Option<Honest>>,
    adversary: Option<Box<dyn Adversary>>,
    delay: DelayModel,
    delay_rngs: Vec<ChaCha8Rng>,
    /// Current generation per (party, timer key); a fire event is live only
    /// while its generation matches.
    timers: HashMap<(PartyId, u64), u64>,
    next_generation: u64,
    level: TraceLevel,
    records: Vec<Record>,
    events: u64,
    started: bool,
    outbox: Outbox,
}

impl World {
    pub fn new(
        header: RunHeader,
        net: &NetworkConfig,
        parties: Vec<Option<Honest>>,
        adversary: Option<Box<dyn Adversary>>,
        level: TraceLevel,
    ) -> Self {
        assert_eq!(parties.len(), net.n as usize);
        let seed = header.seed;
        World {
            now: 0.0,
            queue: EventQueue::default(),
            delay_rngs: (0..net.n)
                .map(|p| party_stream(seed, Stream::Delay, PartyId(p)))
                .collect(),
            delay: DelayModel::new(net.lambda, net.drop_rate),
            parties,
            adversary,
            timers: HashMap::new(),
            next_generation: 0,
            level,
            records: vec![Record {
                t: 0.0,
                ev: Event::RunStart(header),
            }],
            events: 0,
            started: false,
            outbox: Outbox::default(),
        }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn parties(&self) -> &[Option<Honest>] {
        &self.parties
    }

    pub fn party(&self, id: PartyId) -> Option<&Honest> {
        self.parties.get(id.0 as usize)?.as_ref()
    }

    pub fn party_mut(&mut self, id: PartyId) -> Option<&mut Honest> {
        self.parties.get_mut(id.0 as usize)?.as_mut()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    pub fn schedule_broadcast(&mut self, at: f64, party: PartyId, payload: Arc<Payload>) {
        self.queue
            .push(at, Class::Honest, Ev::UserBroadcast { party, payload });
    }

    pub fn schedule_propose(&mut self, at: f64, party: PartyId, value: Option<Bit>) {
        self.queue.push(at, Class::Honest, Ev::Propose { party, value });
    }

    fn is_honest(&self, p: PartyId) -> bool {
        matches!(self.parties.get(p.0 as usize), Some(Some(_)))
    }

    fn push_record(&mut self, ev: Event) {
        let full_only = matches!(ev, Event::Send { .. } | Event::Recv { .. } | Event::Hear { .. });
        if full_only && self.level != TraceLevel::Full {
            return;
        }
        self.records.push(Record { t: self.now, ev });
    }

    fn send_honest(&mut self, from: PartyId, to: PartyId, msg: Message) {
        let rng = &mut self.delay_rngs[from.0 as usize];
        let Some(delay) = self.delay.sample(rng) else {
            return;
        };
        if self.level == TraceLevel::Full {
            self.push_record(Event::Send {
                from,
                to,
                msg: msg.kind().to_string(),
                tx: msg.tx(),
            });
        }
        self.queue
            .push(self.now + delay, Class::Honest, Ev::Deliver { from, to, msg });
    }

    fn apply_party_effects(&mut self, party: PartyId) {
        let mut effects = std::mem::take(&mut self.outbox.effects);
        for eff in effects.drain(..) {
            match eff {
                Effect::Send { to, msg } => self.send_honest(party, to, msg),
                Effect::Gossip(msg) => {
                    for q in 0..self.parties.len() as u32 {
                        if q != party.0 {
                            self.send_honest(party, PartyId(q), msg.clone());
                        }
                    }
                }
                Effect::StartTimer { key, after } => {
                    let generation = self.next_generation;
                    self.next_generation += 1;
                    self.timers.insert((party, key), generation);
                    self.queue.push(
                        self.now + after,
                        Class::Honest,
                        Ev::Timer {
                            party,
                            key,
                            generation,
                        },
                    );
                }
                Effect::CancelTimer { key } => {
                    self.timers.remove(&(party, key));
                }
                Effect::Record(ev) => self.push_record(ev),
            }
        }
        self.outbox.effects = effects;
    }

    fn apply_adversary_effects(&mut self, effects: Vec<AdvEffect>) {
        for eff in effects {
            match eff {
                AdvEffect::Send {
                    from,
                    to,
                    msg,
                    delay,
                } => {
                    if self.level == TraceLevel::Full {
                        self.push_record(Event::Send {
                            from,
                            to,
                            msg: msg.kind().to_string(),
                            tx: msg.tx(),
                        });
                    }
                    self.queue.push(
                        self.now + delay.max(0.0),
                        Class::Adversary,
                        Ev::Deliver { from, to, msg },
                    );
                }
                AdvEffect::Step { after, tag } => {
                    self.queue
                        .push(self.now + after.max(0.0), Class::Adversary, Ev::AdversaryStep { tag });
                }
                AdvEffect::Record(ev) => self.push_record(ev),
            }
        }
    }

    fn with_adversary(&mut self, f: impl FnOnce(&mut dyn Adversary, &mut AdvCtx)) {
        let Some(adv) = self.adversary.as_mut() else {
            return;
        };
        let mut cx = AdvCtx::new(self.now, &self.parties);
        f(adv.as_mut(), &mut cx);
        let effects = cx.into_effects();
        self.apply_adversary_effects(effects);
    }

    fn start(&mut self) {
        if self.started {
            return;
        }
        self.started = true;
        self.with_adversary(|adv, cx| adv.start(cx));
    }

    /// Processes events until the queue drains or the next event lies at or
    /// beyond `horizon`, then appends the closing record.
    pub fn run(&mut self, horizon: f64) {
        self.start();
        while let Some(t) = self.queue.peek_time() {
            if t >= horizon {
                break;
            }
            let (t, ev) = self.queue.pop().expect("peeked");
            self.now = t;
            self.events += 1;
            self.dispatch(ev);
        }
        self.records.push(Record {
            t: self.now.max(0.0),
            ev: Event::RunEnd {
                events: self.events,
            },
        });
    }

    /// Processes a single event; false once the queue is empty.
    pub fn step(&mut self) -> bool {
        self.start();
        let Some((t, ev)) = self.queue.pop() else {
            return false;
        };
        self.now = t;
        self.events += 1;
        self.dispatch(ev);
        true
    }

    fn dispatch(&mut self, ev: Ev) {
        match ev {
            Ev::Deliver { from, to, msg } => {
                if self.level == TraceLevel::Full {
                    self.push_record(Event::Recv {
                        from,
                        to,
                        msg: msg.kind().to_string(),
                        tx: msg.tx(),
                    });
                }
                if self.is_honest(to) {
                    self.on_party(to, |p, out| match p {
                        Honest::Avalanche(a) => a.on_message(from, &msg, out),
                        Honest::Snowball(s) => s.on_message(from, &msg, out),
                    });
                } else {
                    self.with_adversary(|adv, cx| adv.on_message(cx, from, to, &msg));
                }
            }
            Ev::Timer {
                party,
                key,
                generation,
            } => {
                if self.timers.get(&(party, key)) != Some(&generation) {
                    return;
                }
                self.timers.remove(&(party, key));
                self.on_party(party, |p, out| match p {
                    Honest::Avalanche(a) => a.on_timer(key, out),
                    Honest::Snowball(s) => s.on_timer(key, out),
                });
            }
            Ev::UserBroadcast { party, payload } => {
                self.on_party(party, |p, out| {
                    if let Honest::Avalanche(a) = p {
                        a.on_user_broadcast(payload, out);
                    }
                });
            }
            Ev::Propose { party, value } => {
                self.on_party(party, |p, out| {
                    if let Honest::Snowball(s) = p {
                        // a second proposal is a configuration error; ignore it
                        let _ = s.propose(value, out);
                    }
                });
            }
            Ev::AdversaryStep { tag } => {
                self.with_adversary(|adv, cx| adv.on_step(cx, tag));
            }
        }
    }

    fn on_party(&mut self, id: PartyId, f: impl FnOnce(&mut Honest, &mut Outbox)) {
        let Some(Some(p)) = self.parties.get_mut(id.0 as usize) else {
            return;
        };
        f(p, &mut self.outbox);
        self.apply_party_effects(id);
        if self.adversary.as_ref().is_some_and(|a| a.watches_events()) {
            self.with_adversary(|adv, cx| adv.after_event(cx, id));
        }
    }
}
