//! Protocol parameters shared by every Avalanche-family party.

use serde::{Deserialize, Serialize};

use crate::dag::Thresholds;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolParams {
    /// Sample size per poll.
    pub k: u32,
    /// Majority threshold.
    pub alpha: u32,
    /// Early acceptance threshold (sole member of its conflict set).
    pub beta1: u32,
    /// Unconditional acceptance threshold.
    pub beta2: u32,
    pub max_poll: u32,
    /// Poll timer in simulated seconds.
    pub query_timeout: f64,
    pub max_parents: u32,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            k: 20,
            alpha: 15,
            beta1: 15,
            beta2: 150,
            max_poll: 4,
            query_timeout: 1.0,
            max_parents: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{field}: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: String,
}

impl ParamError {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        ParamError {
            field,
            reason: reason.into(),
        }
    }
}

impl ProtocolParams {
    pub fn thresholds(&self) -> Thresholds {
        Thresholds {
            beta1: self.beta1,
            beta2: self.beta2,
        }
    }

    /// Checks the parameter bounds for a network of `n` parties.
    pub fn validate(&self, n: u32) -> Result<(), ParamError> {
        if self.k == 0 {
            return Err(ParamError::new("params.k", "must be positive"));
        }
        if self.k >= n {
            return Err(ParamError::new(
                "params.k",
                format!("sample size {} must be below n = {n}", self.k),
            ));
        }
        let min_alpha = (self.k + 2) / 2;
        if self.alpha < min_alpha || self.alpha > self.k {
            return Err(ParamError::new(
                "params.alpha",
                format!("must lie in {min_alpha}..={}, got {}", self.k, self.alpha),
            ));
        }
        if self.beta1 == 0 {
            return Err(ParamError::new("params.beta1", "must be positive"));
        }
        if self.beta1 > self.beta2 {
            return Err(ParamError::new(
                "params.beta2",
                format!("must be at least beta1 = {}", self.beta1),
            ));
        }
        if self.max_poll == 0 {
            return Err(ParamError::new("params.max_poll", "must be positive"));
        }
        if !(self.query_timeout.is_finite() && self.query_timeout > 0.0) {
            return Err(ParamError::new("params.query_timeout", "must be a positive duration"));
        }
        if self.max_parents == 0 {
            return Err(ParamError::new("params.max_parents", "must be positive"));
        }
        Ok(())
    }
}
