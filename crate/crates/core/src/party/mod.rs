//! The per-party Avalanche reactor: polling with repoll and no-ops, vote
//! replies, vote accounting, acceptance and timeouts.
//!
//! Handlers are pure with respect to the outside world: they mutate local
//! state and push [`Effect`](crate::effect::Effect)s into an [`Outbox`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;

use crate::dag::{validate_payload, Dag, Ledger, Payload, ProtocolTransaction, Thresholds};
use crate::effect::Outbox;
use crate::ids::{PartyId, PayloadId, PollId, TxId};
use crate::message::{Message, VoteBody};
use crate::params::ProtocolParams;
use crate::sim::net::sample_by_stake;
use crate::sim::rng::{party_stream, Stream};
use crate::trace::{Event, PollOutcome, Watch};
use crate::variants::glacier::{self, ShadowCounters};
use crate::variants::implemented;
use crate::variants::Variant;

#[derive(Clone, Debug)]
pub struct PartySetup {
    pub id: PartyId,
    pub params: ProtocolParams,
    pub variant: Variant,
    pub weights: Arc<Vec<f64>>,
    pub genesis: Arc<ProtocolTransaction>,
    pub seed: u64,
    /// A passive party answers queries but never polls.
    pub passive: bool,
    /// Track Glacier counters alongside base Avalanche ones.
    pub shadow: bool,
}

#[derive(Debug)]
struct ActivePoll {
    tx: Arc<ProtocolTransaction>,
    sampled: Vec<PartyId>,
    voted: BTreeSet<PartyId>,
    yes: u32,
    no: u32,
    nonpref: BTreeMap<TxId, u32>,
    ack: BTreeMap<TxId, u32>,
}

#[derive(Debug)]
struct ParkedVote {
    from: PartyId,
    poll: PollId,
    tx: TxId,
    frontier: Vec<TxId>,
}

pub struct AvalancheParty {
    id: PartyId,
    params: ProtocolParams,
    th: Thresholds,
    variant: Variant,
    weights: Arc<Vec<f64>>,
    rng: ChaCha8Rng,
    passive: bool,
    dag: Dag,
    ledger: Ledger,
    con_poll: u32,
    polls: BTreeMap<PollId, ActivePoll>,
    in_flight: BTreeSet<TxId>,
    next_poll: u64,
    next_seq: u64,
    /// Heard transactions waiting for missing parents.
    pending: BTreeMap<TxId, Arc<ProtocolTransaction>>,
    parked_queries: Vec<(PartyId, PollId, Arc<ProtocolTransaction>)>,
    parked_votes: Vec<ParkedVote>,
    /// (completed polls, payload queries) when each transaction was first held.
    seen: HashMap<TxId, (u64, u64)>,
    polls_completed: u64,
    payload_queries: u64,
    watch: Option<TxId>,
    watch_payload: Option<PayloadId>,
    shadow: Option<ShadowCounters>,
}

impl AvalancheParty {
    pub fn new(setup: PartySetup) -> Self {
        let genesis_payload = setup
            .genesis
            .payload
            .clone()
            .expect("genesis carries the minted outputs");
        let dag = Dag::new(setup.genesis.clone());
        let mut seen = HashMap::new();
        seen.insert(setup.genesis.id, (0, 0));
        AvalancheParty {
            id: setup.id,
            th: setup.params.thresholds(),
            params: setup.params,
            variant: setup.variant,
            weights: setup.weights,
            rng: party_stream(setup.seed, Stream::Party, setup.id),
            passive: setup.passive,
            dag,
            ledger: Ledger::with_genesis(&genesis_payload),
            con_poll: 0,
            polls: BTreeMap::new(),
            in_flight: BTreeSet::new(),
            next_poll: 0,
            next_seq: 0,
            pending: BTreeMap::new(),
            parked_queries: Vec::new(),
            parked_votes: Vec::new(),
            seen,
            polls_completed: 0,
            payload_queries: 0,
            watch: None,
            watch_payload: None,
            shadow: setup.shadow.then(ShadowCounters::default),
        }
    }

    pub fn id(&self) -> PartyId {
        self.id
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn active_polls(&self) -> u32 {
        self.con_poll
    }

    pub fn polls_completed(&self) -> u64 {
        self.polls_completed
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    /// Counter of the conflict set of `tx`, if known.
    pub fn cnt_of(&self, tx: TxId) -> Option<u32> {
        self.dag.cnt(tx).ok()
    }

    /// Instrumentation only: poll records will report this transaction's counter.
    pub fn set_watch(&mut self, tx: Option<TxId>) {
        self.watch = tx;
    }

    pub fn watched(&self) -> Option<TxId> {
        self.watch
    }

    /// Watches the first transaction that carries `payload`, once held.
    pub fn watch_payload(&mut self, payload: PayloadId) {
        self.watch_payload = Some(payload);
        self.watch = self
            .dag
            .iter()
            .find(|t| t.payload.as_ref().is_some_and(|p| p.id == payload))
            .map(|t| t.id);
    }

    pub fn shadow(&self) -> Option<&ShadowCounters> {
        self.shadow.as_ref()
    }

    fn fresh_tx_id(&mut self) -> TxId {
        let id = TxId::new(self.id, self.next_seq);
        self.next_seq += 1;
        id
    }

    fn watch_cnt(&self) -> Option<u32> {
        self.watch.and_then(|t| self.dag.cnt(t).ok())
    }

    // ---- user broadcast --------------------------------------------------

    /// A user submits `payload` at this party. Invalid payloads are dropped.
    pub fn on_user_broadcast(&mut self, payload: Arc<Payload>, out: &mut Outbox) {
        if !validate_payload(&payload, &self.ledger) {
            out.record(Event::Broadcast {
                party: self.id,
                tx: None,
                payload: (*payload).clone(),
            });
            return;
        }
        let mut vf: Vec<TxId> = self.dag.virtuous_frontier().iter().copied().collect();
        let max = self.params.max_parents as usize;
        let parents: Vec<TxId> = if vf.len() > max {
            let mut chosen: Vec<TxId> = vf.choose_multiple(&mut self.rng, max).copied().collect();
            chosen.sort_unstable();
            chosen
        } else {
            vf.sort_unstable();
            vf
        };
        let id = self.fresh_tx_id();
        let tx = Arc::new(ProtocolTransaction::new(id, payload.clone(), parents));
        out.record(Event::Broadcast {
            party: self.id,
            tx: Some(id),
            payload: (*payload).clone(),
        });
        self.admit(tx.clone(), out);
        out.gossip(Message::Broadcast(tx));
        self.maybe_poll(out);
    }

    // ---- message dispatch ------------------------------------------------

    pub fn on_message(&mut self, from: PartyId, msg: &Message, out: &mut Outbox) {
        match msg {
            Message::Broadcast(tx) => {
                if self.admit(tx.clone(), out) {
                    out.record(Event::Hear {
                        party: self.id,
                        tx: tx.id,
                    });
                }
                self.maybe_poll(out);
            }
            Message::Query { poll, tx } => self.on_query(from, *poll, tx.clone(), out),
            Message::Vote { poll, tx, body } => self.on_vote(from, *poll, *tx, body, out),
            Message::SnowQuery { .. } | Message::SnowVote { .. } => {}
        }
    }

    /// Timer keys are poll ids.
    pub fn on_timer(&mut self, key: u64, out: &mut Outbox) {
        let poll = PollId(key);
        let Some(p) = self.polls.remove(&poll) else {
            return;
        };
        let tx = p.tx.id;
        let before = self.watch_cnt();
        self.in_flight.remove(&tx);
        self.dag.unmark_queried(tx);
        if p.tx.is_noop() {
            self.dag.push_noop(tx);
        }
        self.con_poll -= 1;
        self.polls_completed += 1;
        let after = self.watch_cnt();
        out.record(Event::PollEnd {
            party: self.id,
            poll,
            tx,
            noop: p.tx.is_noop(),
            outcome: PollOutcome::Timeout,
            yes: p.yes,
            no: p.no,
            watch: self.watch_record(before, after),
        });
        self.parked_votes.retain(|v| v.poll != poll);
        self.maybe_poll(out);
    }

    /// Starts polls while capacity and candidates remain.
    pub fn kick(&mut self, out: &mut Outbox) {
        self.maybe_poll(out);
    }

    // ---- DAG admission ---------------------------------------------------

    /// Inserts `tx` if new, parking it until its parents are known.
    /// Returns true if `tx` was not known before.
    fn admit(&mut self, tx: Arc<ProtocolTransaction>, out: &mut Outbox) -> bool {
        if self.dag.contains(tx.id) || self.pending.contains_key(&tx.id) {
            return false;
        }
        if tx.parents.iter().all(|p| self.dag.contains(*p)) {
            self.insert(tx);
            self.drain_pending();
            self.retry_parked(out);
        } else {
            self.pending.insert(tx.id, tx);
        }
        true
    }

    fn insert(&mut self, tx: Arc<ProtocolTransaction>) {
        let id = tx.id;
        if self.watch.is_none()
            && self.watch_payload.is_some()
            && tx.payload.as_ref().map(|p| p.id) == self.watch_payload
        {
            self.watch = Some(id);
        }
        let report = self.dag.insert(tx).expect("parents checked");
        self.seen
            .insert(id, (self.polls_completed, self.payload_queries));
        if let Some(shadow) = &mut self.shadow {
            let absorbed = report
                .merge
                .as_ref()
                .map(|m| m.absorbed.clone())
                .unwrap_or_default();
            shadow.on_insert(report.key, &absorbed);
            shadow.check(&self.dag);
        }
    }

    fn drain_pending(&mut self) {
        loop {
            let ready: Vec<TxId> = self
                .pending
                .values()
                .filter(|t| t.parents.iter().all(|p| self.dag.contains(*p)))
                .map(|t| t.id)
                .collect();
            if ready.is_empty() {
                return;
            }
            for id in ready {
                let tx = self.pending.remove(&id).expect("listed");
                self.insert(tx);
            }
        }
    }

    fn retry_parked(&mut self, out: &mut Outbox) {
        if !self.parked_queries.is_empty() {
            let parked = std::mem::take(&mut self.parked_queries);
            for (from, poll, tx) in parked {
                self.on_query(from, poll, tx, out);
            }
        }
        if !self.parked_votes.is_empty() {
            let parked = std::mem::take(&mut self.parked_votes);
            for v in parked {
                let body = VoteBody::Frontier {
                    frontier: v.frontier,
                };
                self.on_vote(v.from, v.poll, v.tx, &body, out);
            }
        }
    }

    // ---- replies ---------------------------------------------------------

    fn on_query(
        &mut self,
        from: PartyId,
        poll: PollId,
        tx: Arc<ProtocolTransaction>,
        out: &mut Outbox,
    ) {
        let mut inserted = false;
        let body = match self.variant {
            Variant::Avalanche | Variant::Glacier => match self.preference_vote(&tx) {
                Some(body) => body,
                None => {
                    self.parked_queries.push((from, poll, tx));
                    return;
                }
            },
            Variant::Implemented => {
                if !self.dag.contains(tx.id) {
                    if !tx.parents.iter().all(|p| self.dag.contains(*p)) {
                        self.pending.entry(tx.id).or_insert_with(|| tx.clone());
                        self.parked_queries.push((from, poll, tx));
                        return;
                    }
                    self.pending.remove(&tx.id);
                    self.insert(tx.clone());
                    self.drain_pending();
                    inserted = true;
                }
                // the frontier reply reflects the insertion
                let frontier = self.dag.virtuous_frontier().iter().copied().collect();
                VoteBody::Frontier { frontier }
            }
        };
        out.send(
            from,
            Message::Vote {
                poll,
                tx: tx.id,
                body,
            },
        );
        if inserted {
            self.retry_parked(out);
            if !tx.is_noop() {
                self.maybe_poll(out);
            }
        }
    }

    /// Strong-preference vote on `tx` under the local view, plus the members of
    /// its ancestry (self included) that are not preferred. A transaction not
    /// yet in the DAG is judged as if it had just been inserted: it is
    /// preferred unless it spends an input some known transaction spends.
    /// `None` while a parent is unknown.
    pub fn preference_vote(&self, tx: &ProtocolTransaction) -> Option<VoteBody> {
        if self.dag.contains(tx.id) {
            let nonpref = self.dag.non_preferred_ancestry(tx.id).expect("known");
            return Some(VoteBody::Preference {
                strong: nonpref.is_empty(),
                nonpref,
            });
        }
        if !tx.parents.iter().all(|p| self.dag.contains(*p)) {
            return None;
        }
        let mut nonpref = BTreeSet::new();
        let newcomer_preferred = match &tx.payload {
            Some(p) => !self.dag.spends_known_input(p),
            None => true,
        };
        if !newcomer_preferred {
            nonpref.insert(tx.id);
        }
        for p in &tx.parents {
            nonpref.extend(self.dag.non_preferred_ancestry(*p).expect("known"));
        }
        Some(VoteBody::Preference {
            strong: nonpref.is_empty(),
            nonpref: nonpref.into_iter().collect(),
        })
    }

    // ---- votes -----------------------------------------------------------

    fn on_vote(
        &mut self,
        from: PartyId,
        poll: PollId,
        tx: TxId,
        body: &VoteBody,
        out: &mut Outbox,
    ) {
        let Some(p) = self.polls.get(&poll) else {
            return;
        };
        if p.tx.id != tx || !p.sampled.contains(&from) || p.voted.contains(&from) {
            return;
        }
        match (self.variant, body) {
            (Variant::Avalanche | Variant::Glacier, VoteBody::Preference { strong, nonpref }) => {
                let p = self.polls.get_mut(&poll).expect("checked");
                p.voted.insert(from);
                if *strong {
                    p.yes += 1;
                } else {
                    p.no += 1;
                }
                for t in nonpref {
                    *p.nonpref.entry(*t).or_insert(0) += 1;
                }
            }
            (Variant::Implemented, VoteBody::Frontier { frontier }) => {
                let Some(closure) = implemented::frontier_closure(&self.dag, frontier) else {
                    self.parked_votes.push(ParkedVote {
                        from,
                        poll,
                        tx,
                        frontier: frontier.clone(),
                    });
                    return;
                };
                let p = self.polls.get_mut(&poll).expect("checked");
                p.voted.insert(from);
                if closure.contains(&tx) {
                    p.yes += 1;
                } else {
                    p.no += 1;
                }
                for t in closure {
                    *p.ack.entry(t).or_insert(0) += 1;
                }
            }
            _ => return,
        }
        self.check_completion(poll, out);
    }

    fn check_completion(&mut self, poll: PollId, out: &mut Outbox) {
        let p = &self.polls[&poll];
        let k = self.params.k;
        let alpha = self.params.alpha;
        let all_in = p.voted.len() as u32 == k;
        match self.variant {
            Variant::Avalanche => {
                if p.yes >= alpha {
                    self.complete(poll, PollOutcome::Success, out);
                } else if p.no > k - alpha {
                    self.complete(poll, PollOutcome::Fail, out);
                }
            }
            Variant::Glacier => {
                if p.yes >= alpha {
                    self.complete(poll, PollOutcome::Success, out);
                } else if all_in && p.no > k - alpha {
                    self.complete(poll, PollOutcome::Fail, out);
                }
            }
            Variant::Implemented => {
                if all_in {
                    let outcome = if p.yes >= alpha {
                        PollOutcome::Success
                    } else {
                        PollOutcome::Fail
                    };
                    self.complete(poll, outcome, out);
                }
            }
        }
    }

    fn complete(&mut self, poll: PollId, outcome: PollOutcome, out: &mut Outbox) {
        let p = self.polls.remove(&poll).expect("active");
        let tx = p.tx.id;
        let before = self.watch_cnt();
        out.cancel_timer(poll.0);
        self.in_flight.remove(&tx);
        self.con_poll -= 1;
        self.polls_completed += 1;
        let (k, alpha) = (self.params.k, self.params.alpha);
        match (self.variant, outcome) {
            (Variant::Implemented, _) => implemented::apply_completion(&mut self.dag, &p.ack, alpha),
            (_, PollOutcome::Success) => {
                let steps = self.dag.record_success(tx).expect("polled tx is known");
                if let Some(shadow) = &mut self.shadow {
                    shadow.on_success(&steps);
                }
            }
            (Variant::Avalanche, _) => {
                if let Some(shadow) = &mut self.shadow {
                    shadow.on_failure(&self.dag, &p.nonpref, k, alpha);
                }
                self.dag.record_failure(tx).expect("polled tx is known");
            }
            (Variant::Glacier, _) => glacier::apply_failure(&mut self.dag, &p.nonpref, k, alpha),
        }
        if let Some(shadow) = &mut self.shadow {
            shadow.check(&self.dag);
        }
        let after = self.watch_cnt();
        out.record(Event::PollEnd {
            party: self.id,
            poll,
            tx,
            noop: p.tx.is_noop(),
            outcome,
            yes: p.yes,
            no: p.no,
            watch: self.watch_record(before, after),
        });
        self.parked_votes.retain(|v| v.poll != poll);
        self.try_deliver(out);
        self.maybe_poll(out);
    }

    fn watch_record(&self, before: Option<u32>, after: Option<u32>) -> Option<Watch> {
        match (self.watch, before, after) {
            (Some(tx), Some(before), Some(after)) => Some(Watch { tx, before, after }),
            _ => None,
        }
    }

    // ---- acceptance ------------------------------------------------------

    fn try_deliver(&mut self, out: &mut Outbox) {
        loop {
            let mut progressed = false;
            for id in self.dag.acceptable_unaccepted(self.th) {
                let tx = self.dag.get(id).expect("listed").clone();
                let Some(payload) = &tx.payload else {
                    continue;
                };
                if !validate_payload(payload, &self.ledger) {
                    continue;
                }
                let parents_accepted = self.dag.parents_accepted(id).expect("known");
                let cnt = self.dag.cnt(id).expect("known");
                let conflicting = self.dag.conflict_set_size(id).expect("known") > 1;
                self.dag.mark_accepted(id).expect("known");
                self.ledger.apply(payload);
                let (polls0, queries0) = self.seen.get(&id).copied().unwrap_or((0, 0));
                out.record(Event::Deliver {
                    party: self.id,
                    tx: id,
                    payload: payload.id,
                    cnt,
                    conflicting,
                    parents_accepted,
                    polls_since_seen: self.polls_completed - polls0,
                    queries_since_seen: self.payload_queries - queries0,
                });
                progressed = true;
            }
            if !progressed {
                return;
            }
        }
    }

    // ---- polling ---------------------------------------------------------

    fn maybe_poll(&mut self, out: &mut Outbox) {
        if self.passive {
            return;
        }
        while self.con_poll < self.params.max_poll {
            let Some(tx) = self.next_candidate() else {
                return;
            };
            self.start_poll(tx, out);
        }
    }

    /// Least recent pending no-op, else a uniformly drawn unqueried payload
    /// transaction, else a uniformly drawn repollable one. Repoll candidates
    /// are restricted to unaccepted, preferred, payload-carrying transactions
    /// that are not already in flight.
    fn next_candidate(&mut self) -> Option<Arc<ProtocolTransaction>> {
        if let Some(id) = self.dag.pop_noop() {
            return self.dag.get(id).cloned();
        }
        let fresh = self.dag.unqueried();
        if let Some(&id) = fresh.choose(&mut self.rng) {
            self.dag.reset_confidence(id).expect("listed");
            return self.dag.get(id).cloned();
        }
        self.dag.update_repollable(self.th);
        let candidates = self.dag.repoll_candidates(&self.in_flight);
        let id = *candidates.choose(&mut self.rng)?;
        self.dag.get(id).cloned()
    }

    fn start_poll(&mut self, tx: Arc<ProtocolTransaction>, out: &mut Outbox) {
        let sampled = sample_by_stake(&self.weights, self.id, self.params.k as usize, &mut self.rng)
            .expect("k < n is validated");
        let poll = PollId(self.next_poll);
        self.next_poll += 1;
        self.con_poll += 1;
        for &v in &sampled {
            out.send(
                v,
                Message::Query {
                    poll,
                    tx: tx.clone(),
                },
            );
        }
        if !tx.is_noop() {
            self.payload_queries += 1;
            let parents: Vec<TxId> = self
                .dag
                .virtuous_frontier()
                .iter()
                .copied()
                .filter(|&t| t != tx.id)
                .collect();
            if !parents.is_empty() {
                let id = self.fresh_tx_id();
                self.insert(Arc::new(ProtocolTransaction::noop(id, parents)));
                self.dag.push_noop(id);
            }
        }
        out.start_timer(poll.0, self.params.query_timeout);
        self.dag.mark_queried(tx.id);
        self.in_flight.insert(tx.id);
        out.record(Event::PollStart {
            party: self.id,
            poll,
            tx: tx.id,
            noop: tx.is_noop(),
            sampled: sampled.clone(),
        });
        self.polls.insert(
            poll,
            ActivePoll {
                tx,
                sampled,
                voted: BTreeSet::new(),
                yes: 0,
                no: 0,
                nonpref: BTreeMap::new(),
                ack: BTreeMap::new(),
            },
        );
    }
}
