use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::payload::{OutputRef, Payload};
use super::tx::ProtocolTransaction;
use super::DagError;
use crate::ids::TxId;

/// Canonical handle of a conflict set: the id of the union-find root.
///
/// Members sharing an input are unioned; when established sets merge the
/// key of the set whose preferred member has the highest confidence survives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConflictSetKey(pub TxId);

/// Preference bookkeeping of one conflict set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyState {
    pub pref: TxId,
    pub last: TxId,
    pub cnt: u32,
}

/// Acceptance thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Thresholds {
    pub beta1: u32,
    pub beta2: u32,
}

/// Effect of a successful query on one conflict-set counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CounterStep {
    /// `last` switched to a new member and the counter restarted at one.
    Switched,
    Incremented,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeReport {
    pub winner: ConflictSetKey,
    pub absorbed: Vec<ConflictSetKey>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InsertReport {
    pub key: ConflictSetKey,
    pub merge: Option<MergeReport>,
}

#[derive(Clone, Debug)]
struct Node {
    tx: Arc<ProtocolTransaction>,
    parents: Vec<usize>,
    children: Vec<usize>,
    /// Direct conflicts, self excluded.
    conflicts: Vec<usize>,
    d: u32,
    accepted: bool,
}

/// One party's DAG of protocol transactions.
///
/// Nodes are stored in insertion order, which is topological because a
/// transaction is only inserted once all of its parents are present.
#[derive(Clone, Debug)]
pub struct Dag {
    index: HashMap<TxId, usize>,
    nodes: Vec<Node>,
    spenders: HashMap<OutputRef, Vec<usize>>,
    uf: Vec<usize>,
    /// Counter state, indexed by the conflict-set root; `None` for non-roots.
    keys: Vec<Option<KeyState>>,
    queried: BTreeSet<TxId>,
    /// Node indices of payload-carrying transactions not in `queried`.
    fresh: BTreeSet<usize>,
    /// Membership in R, by node index, as of the last `update_repollable`.
    repollable: Vec<bool>,
    noops: VecDeque<TxId>,
    frontier: BTreeSet<TxId>,
    frontier_dirty: bool,
}

impl Dag {
    /// A DAG holding only the (accepted, already queried) genesis transaction.
    pub fn new(genesis: Arc<ProtocolTransaction>) -> Self {
        let mut dag = Dag {
            index: HashMap::new(),
            nodes: Vec::new(),
            spenders: HashMap::new(),
            uf: Vec::new(),
            keys: Vec::new(),
            queried: BTreeSet::new(),
            fresh: BTreeSet::new(),
            repollable: Vec::new(),
            noops: VecDeque::new(),
            frontier: BTreeSet::new(),
            frontier_dirty: true,
        };
        let id = genesis.id;
        dag.insert(genesis).expect("genesis has no parents");
        dag.nodes[0].accepted = true;
        dag.mark_queried(id);
        dag
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: TxId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn get(&self, id: TxId) -> Option<&Arc<ProtocolTransaction>> {
        self.index.get(&id).map(|&i| &self.nodes[i].tx)
    }

    /// Transactions in insertion (topological) order.
    pub fn iter(&self) -> impl Iterator<Item = &Arc<ProtocolTransaction>> {
        self.nodes.iter().map(|n| &n.tx)
    }

    fn idx(&self, id: TxId) -> Result<usize, DagError> {
        self.index.get(&id).copied().ok_or(DagError::UnknownTx(id))
    }

    fn id_of(&self, i: usize) -> TxId {
        self.nodes[i].tx.id
    }

    fn find(&self, mut i: usize) -> usize {
        while self.uf[i] != i {
            i = self.uf[i];
        }
        i
    }

    /// Inserts `tx`, rebuilding conflict sets symmetrically.
    pub fn insert(&mut self, tx: Arc<ProtocolTransaction>) -> Result<InsertReport, DagError> {
        if self.index.contains_key(&tx.id) {
            return Err(DagError::Duplicate(tx.id));
        }
        let mut parents = Vec::with_capacity(tx.parents.len());
        for p in &tx.parents {
            match self.index.get(p) {
                Some(&pi) => parents.push(pi),
                None => return Err(DagError::UnknownParent(tx.id, *p)),
            }
        }
        let i = self.nodes.len();
        for &p in &parents {
            self.nodes[p].children.push(i);
        }

        let mut conflicting: Vec<usize> = Vec::new();
        if let Some(payload) = &tx.payload {
            for input in &payload.inputs {
                let spenders = self.spenders.entry(*input).or_default();
                for &s in spenders.iter() {
                    if !conflicting.contains(&s) {
                        conflicting.push(s);
                    }
                }
                spenders.push(i);
            }
        }
        conflicting.sort_unstable();
        for &c in &conflicting {
            self.nodes[c].conflicts.push(i);
        }

        self.index.insert(tx.id, i);
        self.nodes.push(Node {
            tx,
            parents,
            children: Vec::new(),
            conflicts: conflicting.clone(),
            d: 0,
            accepted: false,
        });
        self.uf.push(i);
        let own = KeyState {
            pref: self.id_of(i),
            last: self.id_of(i),
            cnt: 0,
        };
        // a no-op is never virtuous and never changes anyone's preference
        if !self.nodes[i].tx.is_noop() {
            self.frontier_dirty = true;
            if !self.queried.contains(&self.id_of(i)) {
                self.fresh.insert(i);
            }
        }

        if conflicting.is_empty() {
            self.keys.push(Some(own));
            return Ok(InsertReport {
                key: ConflictSetKey(self.id_of(i)),
                merge: None,
            });
        }

        self.keys.push(None);
        let mut roots: Vec<usize> = conflicting.iter().map(|&c| self.find(c)).collect();
        roots.sort_unstable();
        roots.dedup();
        // Highest-confidence preferred member wins; ties keep the earliest set.
        let winner = *roots
            .iter()
            .max_by(|&&a, &&b| {
                let da = self.d_of_key(a);
                let db = self.d_of_key(b);
                da.cmp(&db).then(b.cmp(&a))
            })
            .expect("non-empty");
        let absorbed: Vec<usize> = roots.iter().copied().filter(|&r| r != winner).collect();
        for &r in &absorbed {
            self.uf[r] = winner;
            self.keys[r] = None;
        }
        self.uf[i] = winner;
        // flatten paths of every member we touched
        for &c in &conflicting {
            let root = self.find(c);
            self.uf[c] = root;
        }
        Ok(InsertReport {
            key: ConflictSetKey(self.id_of(winner)),
            merge: Some(MergeReport {
                winner: ConflictSetKey(self.id_of(winner)),
                absorbed: absorbed
                    .into_iter()
                    .map(|r| ConflictSetKey(self.id_of(r)))
                    .collect(),
            }),
        })
    }

    fn d_of_key(&self, root: usize) -> u32 {
        let pref = self.keys[root].as_ref().expect("root").pref;
        self.nodes[self.index[&pref]].d
    }

    // ---- structure -------------------------------------------------------

    /// The parent list stored in the transaction itself.
    pub fn parents(&self, id: TxId) -> Result<&[TxId], DagError> {
        let i = self.idx(id)?;
        Ok(&self.nodes[i].tx.parents)
    }

    pub fn children(&self, id: TxId) -> Result<BTreeSet<TxId>, DagError> {
        let i = self.idx(id)?;
        Ok(self.nodes[i].children.iter().map(|&c| self.id_of(c)).collect())
    }

    fn closure(&self, start: usize, up: bool) -> Vec<usize> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![start];
        let mut out = Vec::new();
        while let Some(i) = stack.pop() {
            let next = if up {
                &self.nodes[i].parents
            } else {
                &self.nodes[i].children
            };
            for &j in next {
                if !seen[j] {
                    seen[j] = true;
                    out.push(j);
                    stack.push(j);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Strict ancestors (transitive parents).
    pub fn ancestors(&self, id: TxId) -> Result<BTreeSet<TxId>, DagError> {
        let i = self.idx(id)?;
        Ok(self.closure(i, true).into_iter().map(|j| self.id_of(j)).collect())
    }

    /// Strict descendants (transitive children).
    pub fn descendants(&self, id: TxId) -> Result<BTreeSet<TxId>, DagError> {
        let i = self.idx(id)?;
        Ok(self.closure(i, false).into_iter().map(|j| self.id_of(j)).collect())
    }

    /// `id` followed by its ancestors in topological order.
    fn self_and_ancestors(&self, i: usize) -> Vec<usize> {
        let mut v = vec![i];
        v.extend(self.closure(i, true));
        v
    }

    /// `id` together with all its ancestors.
    pub fn ancestry(&self, id: TxId) -> Result<Vec<TxId>, DagError> {
        let i = self.idx(id)?;
        Ok(self
            .self_and_ancestors(i)
            .into_iter()
            .map(|j| self.id_of(j))
            .collect())
    }

    // ---- conflict sets ---------------------------------------------------

    /// Members sharing an input with `id`, including `id` itself.
    pub fn conflict_set(&self, id: TxId) -> Result<BTreeSet<TxId>, DagError> {
        let i = self.idx(id)?;
        let mut set: BTreeSet<TxId> = self.nodes[i].conflicts.iter().map(|&c| self.id_of(c)).collect();
        set.insert(id);
        Ok(set)
    }

    /// True iff some known transaction spends one of `payload`'s inputs.
    pub fn spends_known_input(&self, payload: &Payload) -> bool {
        payload
            .inputs
            .iter()
            .any(|i| self.spenders.get(i).is_some_and(|s| !s.is_empty()))
    }

    pub fn conflict_set_size(&self, id: TxId) -> Result<usize, DagError> {
        let i = self.idx(id)?;
        Ok(self.nodes[i].conflicts.len() + 1)
    }

    pub fn key_of(&self, id: TxId) -> Result<ConflictSetKey, DagError> {
        let i = self.idx(id)?;
        Ok(ConflictSetKey(self.id_of(self.find(i))))
    }

    pub fn key_state(&self, key: ConflictSetKey) -> Option<&KeyState> {
        let i = *self.index.get(&key.0)?;
        if self.uf[i] != i {
            return None;
        }
        self.keys[i].as_ref()
    }

    /// All live keys, sorted.
    pub fn keys(&self) -> Vec<(ConflictSetKey, KeyState)> {
        let mut v: Vec<_> = self
            .keys
            .iter()
            .enumerate()
            .filter_map(|(r, s)| s.map(|s| (ConflictSetKey(self.id_of(r)), s)))
            .collect();
        v.sort_unstable_by_key(|(k, _)| *k);
        v
    }

    fn state_mut(&mut self, i: usize) -> &mut KeyState {
        let root = self.find(i);
        self.keys[root].as_mut().expect("every root has a key state")
    }

    fn state(&self, i: usize) -> &KeyState {
        self.keys[self.find(i)].as_ref().expect("every root has a key state")
    }

    pub fn cnt(&self, id: TxId) -> Result<u32, DagError> {
        Ok(self.state(self.idx(id)?).cnt)
    }

    pub fn d(&self, id: TxId) -> Result<u32, DagError> {
        Ok(self.nodes[self.idx(id)?].d)
    }

    pub fn pref(&self, id: TxId) -> Result<TxId, DagError> {
        Ok(self.state(self.idx(id)?).pref)
    }

    pub fn is_accepted(&self, id: TxId) -> Result<bool, DagError> {
        Ok(self.nodes[self.idx(id)?].accepted)
    }

    // ---- preference ------------------------------------------------------

    fn preferred_idx(&self, i: usize) -> bool {
        self.state(i).pref == self.id_of(i)
    }

    pub fn preferred(&self, id: TxId) -> Result<bool, DagError> {
        Ok(self.preferred_idx(self.idx(id)?))
    }

    /// `id` and every ancestor are preferred in their own conflict sets.
    pub fn strongly_preferred(&self, id: TxId) -> Result<bool, DagError> {
        let i = self.idx(id)?;
        Ok(self.self_and_ancestors(i).into_iter().all(|j| self.preferred_idx(j)))
    }

    /// Members of `id`'s ancestry (self included) that are not preferred.
    pub fn non_preferred_ancestry(&self, id: TxId) -> Result<Vec<TxId>, DagError> {
        let i = self.idx(id)?;
        Ok(self
            .self_and_ancestors(i)
            .into_iter()
            .filter(|&j| !self.preferred_idx(j))
            .map(|j| self.id_of(j))
            .collect())
    }

    fn strong_flags(&self) -> Vec<bool> {
        let mut strong = vec![false; self.nodes.len()];
        for i in 0..self.nodes.len() {
            strong[i] =
                self.preferred_idx(i) && self.nodes[i].parents.iter().all(|&p| strong[p]);
        }
        strong
    }

    // ---- acceptance ------------------------------------------------------

    /// Acceptability of every node, in insertion order.
    ///
    /// Early path: sole member of its conflict set, counter at least `beta1`
    /// and every parent accepted or acceptable. Late path: counter at least
    /// `beta2` while being the preferred member.
    fn acceptable_flags(&self, th: Thresholds) -> Vec<bool> {
        let mut ok = vec![false; self.nodes.len()];
        for i in 0..self.nodes.len() {
            let node = &self.nodes[i];
            let cnt = self.state(i).cnt;
            let early = node.conflicts.is_empty()
                && cnt >= th.beta1
                && node.parents.iter().all(|&p| ok[p] || self.nodes[p].accepted);
            let late = cnt >= th.beta2 && self.preferred_idx(i);
            ok[i] = early || late;
        }
        ok
    }

    pub fn acceptable(&self, id: TxId, th: Thresholds) -> Result<bool, DagError> {
        let i = self.idx(id)?;
        Ok(self.acceptable_flags(th)[i])
    }

    /// Unaccepted transactions that are currently acceptable, in topological order.
    pub fn acceptable_unaccepted(&self, th: Thresholds) -> Vec<TxId> {
        let flags = self.acceptable_flags(th);
        (0..self.nodes.len())
            .filter(|&i| flags[i] && !self.nodes[i].accepted)
            .map(|i| self.id_of(i))
            .collect()
    }

    pub fn parents_accepted(&self, id: TxId) -> Result<bool, DagError> {
        let i = self.idx(id)?;
        Ok(self.nodes[i].parents.iter().all(|&p| self.nodes[p].accepted))
    }

    /// Some other member of the conflict set has been accepted.
    pub fn is_rejected(&self, id: TxId) -> Result<bool, DagError> {
        let i = self.idx(id)?;
        Ok(self.is_rejected_idx(i))
    }

    fn is_rejected_idx(&self, i: usize) -> bool {
        self.nodes[i].conflicts.iter().any(|&c| self.nodes[c].accepted)
    }

    /// Marks `id` accepted. Returns false if it already was.
    pub fn mark_accepted(&mut self, id: TxId) -> Result<bool, DagError> {
        let i = self.idx(id)?;
        let fresh = !self.nodes[i].accepted;
        self.nodes[i].accepted = true;
        Ok(fresh)
    }

    // ---- polling state ---------------------------------------------------

    /// Recomputes R: acceptable, or every parent strongly preferred and not rejected.
    pub fn update_repollable(&mut self, th: Thresholds) {
        let acceptable = self.acceptable_flags(th);
        let strong = self.strong_flags();
        let flags = (0..self.nodes.len())
            .map(|i| {
                acceptable[i]
                    || self.nodes[i]
                        .parents
                        .iter()
                        .all(|&p| strong[p] && !self.is_rejected_idx(p))
            })
            .collect();
        self.repollable = flags;
    }

    /// R as of the last [`Dag::update_repollable`].
    pub fn repollable(&self) -> BTreeSet<TxId> {
        self.repollable
            .iter()
            .enumerate()
            .filter(|(_, &r)| r)
            .map(|(i, _)| self.id_of(i))
            .collect()
    }

    /// Members of R worth polling again: unaccepted, preferred, carrying a
    /// payload and not in `busy`. Topological order.
    pub fn repoll_candidates(&self, busy: &BTreeSet<TxId>) -> Vec<TxId> {
        self.repollable
            .iter()
            .enumerate()
            .filter(|&(i, &r)| {
                let n = &self.nodes[i];
                r && !n.accepted && !n.tx.is_noop() && self.preferred_idx(i) && !busy.contains(&n.tx.id)
            })
            .map(|(i, _)| self.id_of(i))
            .collect()
    }

    pub fn queried(&self) -> &BTreeSet<TxId> {
        &self.queried
    }

    pub fn is_queried(&self, id: TxId) -> bool {
        self.queried.contains(&id)
    }

    pub fn mark_queried(&mut self, id: TxId) {
        self.queried.insert(id);
        if let Some(&i) = self.index.get(&id) {
            self.fresh.remove(&i);
        }
    }

    pub fn unmark_queried(&mut self, id: TxId) {
        self.queried.remove(&id);
        if let Some(&i) = self.index.get(&id) {
            if !self.nodes[i].tx.is_noop() {
                self.fresh.insert(i);
            }
        }
    }

    /// Queried transactions in topological order.
    pub fn queried_in_order(&self) -> Vec<TxId> {
        let mut idx: Vec<usize> = self.queried.iter().filter_map(|t| self.index.get(t).copied()).collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| self.id_of(i)).collect()
    }

    /// Payload-carrying transactions never queried, in topological order.
    pub fn unqueried(&self) -> Vec<TxId> {
        self.fresh.iter().map(|&i| self.id_of(i)).collect()
    }

    pub fn push_noop(&mut self, id: TxId) {
        self.noops.push_back(id);
    }

    /// Least recent pending no-op.
    pub fn pop_noop(&mut self) -> Option<TxId> {
        self.noops.pop_front()
    }

    pub fn pending_noops(&self) -> &VecDeque<TxId> {
        &self.noops
    }

    /// Virtuous frontier: payload-carrying (or genesis), non-conflicting,
    /// strongly preferred transactions none of whose children share those
    /// properties.
    pub fn virtuous_frontier(&mut self) -> &BTreeSet<TxId> {
        if self.frontier_dirty {
            let strong = self.strong_flags();
            let virtuous: Vec<bool> = (0..self.nodes.len())
                .map(|i| {
                    let n = &self.nodes[i];
                    !n.tx.is_noop() && n.conflicts.is_empty() && strong[i]
                })
                .collect();
            self.frontier = (0..self.nodes.len())
                .filter(|&i| virtuous[i] && !self.nodes[i].children.iter().any(|&c| virtuous[c]))
                .map(|i| self.id_of(i))
                .collect();
            self.frontier_dirty = false;
        }
        &self.frontier
    }

    // ---- counters --------------------------------------------------------

    /// `d[id] := 0`, applied when a transaction is first queried.
    pub fn reset_confidence(&mut self, id: TxId) -> Result<(), DagError> {
        let i = self.idx(id)?;
        self.nodes[i].d = 0;
        Ok(())
    }

    fn success_one(&mut self, j: usize) -> (ConflictSetKey, CounterStep) {
        self.nodes[j].d += 1;
        let d = self.nodes[j].d;
        let id = self.id_of(j);
        let pref_d = {
            let pref = self.state(j).pref;
            self.nodes[self.index[&pref]].d
        };
        let root = self.find(j);
        let key = ConflictSetKey(self.id_of(root));
        let st = self.state_mut(j);
        let mut pref_changed = false;
        if d > pref_d && st.pref != id {
            st.pref = id;
            pref_changed = true;
        }
        let step = if st.last != id {
            st.last = id;
            st.cnt = 1;
            CounterStep::Switched
        } else {
            st.cnt += 1;
            CounterStep::Incremented
        };
        if pref_changed {
            self.frontier_dirty = true;
        }
        (key, step)
    }

    /// Successful query of `id`: confidence, preference and counters of `id`
    /// and every ancestor are advanced.
    pub fn record_success(&mut self, id: TxId) -> Result<Vec<(ConflictSetKey, CounterStep)>, DagError> {
        let i = self.idx(id)?;
        let members = self.self_and_ancestors(i);
        Ok(members.into_iter().map(|j| self.success_one(j)).collect())
    }

    /// Success update applied to `id` alone.
    pub fn record_success_single(&mut self, id: TxId) -> Result<(ConflictSetKey, CounterStep), DagError> {
        let i = self.idx(id)?;
        Ok(self.success_one(i))
    }

    /// Failed query of `id`: counters of `id` and every ancestor drop to zero.
    pub fn record_failure(&mut self, id: TxId) -> Result<Vec<ConflictSetKey>, DagError> {
        let i = self.idx(id)?;
        let members = self.self_and_ancestors(i);
        let mut keys = Vec::with_capacity(members.len());
        for j in members {
            self.state_mut(j).cnt = 0;
            keys.push(ConflictSetKey(self.id_of(self.find(j))));
        }
        Ok(keys)
    }

    pub fn reset_counter(&mut self, id: TxId) -> Result<ConflictSetKey, DagError> {
        let i = self.idx(id)?;
        self.state_mut(i).cnt = 0;
        Ok(ConflictSetKey(self.id_of(self.find(i))))
    }

    pub fn increment_counter(&mut self, id: TxId) -> Result<ConflictSetKey, DagError> {
        let i = self.idx(id)?;
        self.state_mut(i).cnt += 1;
        Ok(ConflictSetKey(self.id_of(self.find(i))))
    }
}
