use std::fmt::Write;

use super::graph::{Dag, Thresholds};

/// Order-independent text dump of a DAG: one line per transaction sorted by id,
/// then one line per conflict-set key.
pub fn canonical_text(dag: &Dag, th: Thresholds) -> String {
    let mut txs: Vec<_> = dag.iter().collect();
    txs.sort_unstable_by_key(|t| t.id);
    let mut out = String::new();
    for t in txs {
        let mut parents = t.parents.clone();
        parents.sort_unstable();
        let payload = match &t.payload {
            Some(p) => p.id.to_string(),
            None => "noop".to_string(),
        };
        let parents: Vec<String> = parents.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(
            out,
            "tx {} payload={} parents=[{}] d={} accepted={} acceptable={} key={}",
            t.id,
            payload,
            parents.join(","),
            dag.d(t.id).unwrap_or(0),
            dag.is_accepted(t.id).unwrap_or(false),
            dag.acceptable(t.id, th).unwrap_or(false),
            dag.key_of(t.id).map(|k| k.0.to_string()).unwrap_or_default(),
        );
    }
    for (key, st) in dag.keys() {
        let members: Vec<String> = dag
            .iter()
            .filter(|t| dag.key_of(t.id).ok() == Some(key))
            .map(|t| t.id)
            .collect::<std::collections::BTreeSet<_>>()
            .iter()
            .map(|id| id.to_string())
            .collect();
        let _ = writeln!(
            out,
            "set {} members=[{}] pref={} last={} cnt={}",
            key.0,
            members.join(","),
            st.pref,
            st.last,
            st.cnt
        );
    }
    out
}
