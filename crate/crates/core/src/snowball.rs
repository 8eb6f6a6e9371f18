//! Single-decision Snowball consensus: rounds of sampling, per-value
//! confidence and a consecutive-success counter.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::effect::Outbox;
use crate::ids::PartyId;
use crate::message::{Bit, Message};
use crate::sim::net::sample_by_stake;
use crate::sim::rng::{party_stream, Stream};
use crate::trace::Event;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SnowParams {
    pub k: u32,
    pub alpha: u32,
    pub beta: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SnowError {
    #[error("party already proposed")]
    AlreadyProposed,
}

/// What a completed round did to the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoundOutcome {
    /// `value` reached the alpha threshold.
    Majority { value: Bit },
    NoMajority,
}

/// The pure state machine of one Snowball party.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnowballState {
    pub params: SnowParams,
    pub b: Option<Bit>,
    pub d: [u32; 2],
    pub cnt: u32,
    pub votes: [u32; 2],
    pub new_round: bool,
    pub decided: bool,
    pub proposed: bool,
    /// Value handed to `decide`, once.
    pub decision: Option<Bit>,
}

impl SnowballState {
    pub fn new(params: SnowParams) -> Self {
        SnowballState {
            params,
            b: None,
            d: [0, 0],
            cnt: 0,
            votes: [0, 0],
            new_round: false,
            decided: false,
            proposed: false,
            decision: None,
        }
    }

    pub fn propose(&mut self, b: Option<Bit>) -> Result<(), SnowError> {
        if self.proposed || self.decision.is_some() {
            return Err(SnowError::AlreadyProposed);
        }
        self.proposed = true;
        if self.b.is_none() {
            self.b = b;
        }
        self.decided = false;
        self.new_round = true;
        Ok(())
    }

    /// Consumes the new-round flag. True iff the party should now query.
    pub fn begin_round(&mut self) -> bool {
        if !(self.new_round && !self.decided) {
            return false;
        }
        self.new_round = false;
        self.votes = [0, 0];
        self.b.is_some()
    }

    /// Reply to a query carrying `value`; an undefined local value adopts it.
    pub fn on_query(&mut self, value: Bit) -> Bit {
        if self.b.is_none() {
            self.decided = false;
            self.b = Some(value);
        }
        self.b.expect("set above")
    }

    /// Applies an alpha-majority for `value`.
    pub fn apply_majority(&mut self, value: Bit) {
        let v = value as usize;
        self.d[v] += 1;
        match self.b {
            Some(b) if b == value => self.cnt += 1,
            Some(b) if self.d[v] > self.d[b as usize] => {
                self.b = Some(value);
                self.cnt = 0;
            }
            _ => {}
        }
        self.new_round = true;
    }

    pub fn apply_no_majority(&mut self) {
        self.cnt = 0;
        self.new_round = true;
    }

    /// Fires `decide` when the counter hits beta. Returns the decided value once.
    pub fn decide_check(&mut self) -> Option<Bit> {
        if self.cnt == self.params.beta && !self.decided {
            self.decided = true;
            if self.decision.is_none() {
                self.decision = self.b;
                return self.b;
            }
        }
        None
    }

    /// Round outcome for a tally, if the round is over.
    pub fn outcome(&self, tally: [u32; 2]) -> Option<RoundOutcome> {
        let alpha = self.params.alpha;
        for value in [0u8, 1] {
            if tally[value as usize] >= alpha {
                return Some(RoundOutcome::Majority { value });
            }
        }
        (tally[0] + tally[1] == self.params.k).then_some(RoundOutcome::NoMajority)
    }
}

/// Sequential Snowball driven by injected round tallies instead of a network.
/// Returns the decided value, if any, and the number of rounds consumed.
pub fn run_oracle(
    params: SnowParams,
    initial: Option<Bit>,
    tallies: impl IntoIterator<Item = [u32; 2]>,
) -> (Option<Bit>, usize) {
    let mut st = SnowballState::new(params);
    st.propose(initial).expect("fresh state");
    let mut rounds = 0;
    for tally in tallies {
        if !st.begin_round() {
            break;
        }
        rounds += 1;
        match st.outcome(tally) {
            Some(RoundOutcome::Majority { value }) => st.apply_majority(value),
            Some(RoundOutcome::NoMajority) => st.apply_no_majority(),
            None => panic!("injected tally {tally:?} does not end a round"),
        }
        if let Some(v) = st.decide_check() {
            return (Some(v), rounds);
        }
    }
    (st.decision, rounds)
}

/// Snowball as a network party.
pub struct SnowballParty {
    id: PartyId,
    state: SnowballState,
    weights: Arc<Vec<f64>>,
    rng: ChaCha8Rng,
    round: u64,
    sampled: Vec<PartyId>,
    responded: BTreeSet<PartyId>,
    in_round: bool,
    round_timeout: f64,
}

impl SnowballParty {
    pub fn new(id: PartyId, params: SnowParams, weights: Arc<Vec<f64>>, seed: u64, round_timeout: f64) -> Self {
        SnowballParty {
            id,
            state: SnowballState::new(params),
            weights,
            rng: party_stream(seed, Stream::Party, id),
            round: 0,
            sampled: Vec::new(),
            responded: BTreeSet::new(),
            in_round: false,
            round_timeout,
        }
    }

    pub fn state(&self) -> &SnowballState {
        &self.state
    }

    pub fn propose(&mut self, b: Option<Bit>, out: &mut Outbox) -> Result<(), SnowError> {
        self.state.propose(b)?;
        out.record(Event::Propose {
            party: self.id,
            value: b,
        });
        self.step(out);
        Ok(())
    }

    fn step(&mut self, out: &mut Outbox) {
        if self.in_round || !self.state.begin_round() {
            return;
        }
        self.round += 1;
        self.sampled = sample_by_stake(
            &self.weights,
            self.id,
            self.state.params.k as usize,
            &mut self.rng,
        )
        .expect("k < n is validated");
        self.responded.clear();
        self.in_round = true;
        let value = self.state.b.expect("begin_round checked");
        for &v in &self.sampled {
            out.send(
                v,
                Message::SnowQuery {
                    round: self.round,
                    value,
                },
            );
        }
        out.start_timer(self.round, self.round_timeout);
    }

    pub fn on_message(&mut self, from: PartyId, msg: &Message, out: &mut Outbox) {
        match *msg {
            Message::SnowQuery { round, value } => {
                let reply = self.state.on_query(value);
                out.send(from, Message::SnowVote { round, value: reply });
            }
            Message::SnowVote { round, value } => self.on_vote(from, round, value, out),
            _ => {}
        }
    }

    fn on_vote(&mut self, from: PartyId, round: u64, value: Bit, out: &mut Outbox) {
        if !self.in_round
            || round != self.round
            || value > 1
            || !self.sampled.contains(&from)
            || !self.responded.insert(from)
        {
            return;
        }
        self.state.votes[value as usize] += 1;
        let Some(outcome) = self.state.outcome(self.state.votes) else {
            return;
        };
        match outcome {
            RoundOutcome::Majority { value } => self.state.apply_majority(value),
            RoundOutcome::NoMajority => self.state.apply_no_majority(),
        }
        self.finish_round(out);
    }

    /// Round timer: the round is abandoned without touching the counters.
    pub fn on_timer(&mut self, key: u64, out: &mut Outbox) {
        if !self.in_round || key != self.round {
            return;
        }
        self.state.new_round = true;
        self.finish_round(out);
    }

    fn finish_round(&mut self, out: &mut Outbox) {
        self.in_round = false;
        out.cancel_timer(self.round);
        let st = &self.state;
        out.record(Event::SnowRound {
            party: self.id,
            round: self.round,
            sampled: self.sampled.clone(),
            tally: st.votes,
            b: st.b,
            d: st.d,
            cnt: st.cnt,
            decided: st.decided,
        });
        if let Some(value) = self.state.decide_check() {
            out.record(Event::Decide {
                party: self.id,
                value,
            });
        }
        self.step(out);
    }
}
