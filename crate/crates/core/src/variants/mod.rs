//! Vote pipelines that replace the base Avalanche failure handling.

pub mod glacier;
pub mod implemented;

use serde::{Deserialize, Serialize};

/// Which vote pipeline a DAG party runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Avalanche,
    Glacier,
    /// Votes carry the replier's virtuous frontier.
    Implemented,
}
