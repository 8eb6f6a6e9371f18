use std::collections::{BTreeMap, BTreeSet};

use crate::dag::Dag;
use crate::ids::TxId;

/// Union of the ancestries (members included) of a reported frontier.
/// `None` if some member is not yet known locally.
pub fn frontier_closure(dag: &Dag, frontier: &[TxId]) -> Option<BTreeSet<TxId>> {
    let mut out = BTreeSet::new();
    for &t in frontier {
        if out.contains(&t) {
            continue;
        }
        out.extend(dag.ancestry(t).ok()?);
    }
    Some(out)
}

/// Completion of a poll once all `k` frontiers are in: every queried
/// transaction acknowledged by at least `alpha` voters gets the success
/// update, every other one a counter reset. Queried transactions are
/// visited in topological order.
pub fn apply_completion(dag: &mut Dag, ack: &BTreeMap<TxId, u32>, alpha: u32) {
    for t in dag.queried_in_order() {
        if ack.get(&t).copied().unwrap_or(0) >= alpha {
            dag.record_success_single(t).expect("known");
        } else {
            dag.reset_counter(t).expect("known");
        }
    }
}
