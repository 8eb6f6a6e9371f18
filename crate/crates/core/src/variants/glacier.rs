use std::collections::{BTreeMap, HashMap};

use crate::dag::{ConflictSetKey, Dag};
use crate::ids::TxId;

/// Glacier failure rule: a member reported non-preferred by more than `k - alpha`
/// voters has its counter reset, any other reported member has it incremented.
/// Members never reported are left alone.
pub fn apply_failure(dag: &mut Dag, nonpref: &BTreeMap<TxId, u32>, k: u32, alpha: u32) {
    for (&t, &count) in nonpref {
        if !dag.contains(t) {
            continue;
        }
        if count > k - alpha {
            dag.reset_counter(t).expect("known");
        } else {
            dag.increment_counter(t).expect("known");
        }
    }
}

/// Counter values a Glacier party would hold if it had seen exactly the vote
/// stream of an Avalanche party. Kept alongside the real counters to check
/// that Glacier never trails Avalanche.
#[derive(Clone, Debug, Default)]
pub struct ShadowCounters {
    cnt: HashMap<ConflictSetKey, u32>,
    pub checks: u64,
    pub violations: u64,
}

impl ShadowCounters {
    pub fn get(&self, key: ConflictSetKey) -> u32 {
        self.cnt.get(&key).copied().unwrap_or(0)
    }

    pub fn on_insert(&mut self, key: ConflictSetKey, absorbed: &[ConflictSetKey]) {
        for a in absorbed {
            self.cnt.remove(a);
        }
        self.cnt.entry(key).or_insert(0);
    }

    pub fn on_success(&mut self, steps: &[(ConflictSetKey, crate::dag::CounterStep)]) {
        for &(key, step) in steps {
            let c = self.cnt.entry(key).or_insert(0);
            match step {
                crate::dag::CounterStep::Switched => *c = 1,
                crate::dag::CounterStep::Incremented => *c += 1,
            }
        }
    }

    pub fn on_failure(&mut self, dag: &Dag, nonpref: &BTreeMap<TxId, u32>, k: u32, alpha: u32) {
        for (&t, &count) in nonpref {
            let Ok(key) = dag.key_of(t) else { continue };
            let c = self.cnt.entry(key).or_insert(0);
            if count > k - alpha {
                *c = 0;
            } else {
                *c += 1;
            }
        }
    }

    /// Compares against the real counters; returns false on the first key
    /// where the shadow trails.
    pub fn check(&mut self, dag: &Dag) -> bool {
        self.checks += 1;
        let ok = dag.keys().iter().all(|(key, st)| self.get(*key) >= st.cnt);
        if !ok {
            self.violations += 1;
        }
        ok
    }
}
