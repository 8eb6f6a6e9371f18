use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::ids::PartyId;
use crate::params::ParamError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n: u32,
    /// Corrupted parties; they take the ids `n - f .. n`.
    pub f: u32,
    /// Rate of the exponential honest delay, per second.
    pub lambda: f64,
    pub drop_rate: f64,
    /// Per-party weights; empty means uniform.
    pub stake: Vec<f64>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            n: 50,
            f: 0,
            lambda: 10.0,
            drop_rate: 0.0,
            stake: Vec::new(),
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), ParamError> {
        if self.n < 2 {
            return Err(ParamError::new("network.n", "need at least two parties"));
        }
        if self.f >= self.n {
            return Err(ParamError::new("network.f", "at least one party must be honest"));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ParamError::new("network.lambda", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return Err(ParamError::new("network.drop_rate", "must lie in [0, 1]"));
        }
        if !self.stake.is_empty() {
            if self.stake.len() != self.n as usize {
                return Err(ParamError::new("network.stake", "needs one weight per party"));
            }
            if self.stake.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(ParamError::new("network.stake", "weights must be positive"));
            }
        }
        Ok(())
    }

    pub fn is_corrupt(&self, p: PartyId) -> bool {
        p.0 >= self.n - self.f
    }

    pub fn honest(&self) -> Vec<PartyId> {
        (0..self.n - self.f).map(PartyId).collect()
    }

    pub fn corrupt(&self) -> Vec<PartyId> {
        (self.n - self.f..self.n).map(PartyId).collect()
    }

    pub fn weights(&self) -> Vec<f64> {
        if self.stake.is_empty() {
            vec![1.0; self.n as usize]
        } else {
            self.stake.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot sample {k} parties out of {available}")]
pub struct SampleError {
    pub k: usize,
    pub available: usize,
}

/// Draws `k` distinct parties other than `excluding`, without replacement and
/// with probability proportional to stake.
pub fn sample_by_stake<R: Rng + ?Sized>(
    weights: &[f64],
    excluding: PartyId,
    k: usize,
    rng: &mut R,
) -> Result<Vec<PartyId>, SampleError> {
    let others: Vec<PartyId> = (0..weights.len() as u32)
        .map(PartyId)
        .filter(|&p| p != excluding)
        .collect();
    if k >= weights.len() || k > others.len() {
        return Err(SampleError {
            k,
            available: others.len(),
        });
    }
    let chosen = others
        .choose_multiple_weighted(rng, k, |p| weights[p.0 as usize])
        .expect("weights validated positive");
    Ok(chosen.copied().collect())
}

/// Honest message delay law.
#[derive(Clone, Copy, Debug)]
pub struct DelayModel {
    exp: Exp<f64>,
    drop_rate: f64,
}

impl DelayModel {
    pub fn new(lambda: f64, drop_rate: f64) -> Self {
        DelayModel {
            exp: Exp::new(lambda).expect("lambda validated positive"),
            drop_rate,
        }
    }

    /// A delay, or `None` if the message is lost.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        if self.drop_rate > 0.0 && rng.random::<f64>() < self.drop_rate {
            return None;
        }
        Some(self.exp.sample(rng))
    }
}
