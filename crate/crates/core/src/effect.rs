//! Side effects requested by a party reactor; the simulator applies them.

use crate::ids::PartyId;
use crate::message::Message;
use crate::trace::Event;

#[derive(Clone, Debug)]
pub enum Effect {
    Send { to: PartyId, msg: Message },
    Gossip(Message),
    /// (Re)starts the timer `key`, replacing any pending deadline.
    StartTimer { key: u64, after: f64 },
    CancelTimer { key: u64 },
    Record(Event),
}

#[derive(Debug, Default)]
pub struct Outbox {
    pub effects: Vec<Effect>,
}

impl Outbox {
    pub fn send(&mut self, to: PartyId, msg: Message) {
        self.effects.push(Effect::Send { to, msg });
    }

    pub fn gossip(&mut self, msg: Message) {
        self.effects.push(Effect::Gossip(msg));
    }

    pub fn start_timer(&mut self, key: u64, after: f64) {
        self.effects.push(Effect::StartTimer { key, after });
    }

    pub fn cancel_timer(&mut self, key: u64) {
        self.effects.push(Effect::CancelTimer { key });
    }

    pub fn record(&mut self, ev: Event) {
        self.effects.push(Effect::Record(ev));
    }

    pub fn drain(&mut self) -> std::vec::Drain<'_, Effect> {
        self.effects.drain(..)
    }
}
