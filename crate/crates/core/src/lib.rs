//! Simulation, attack and analysis toolkit for the Avalanche family of
//! DAG-based consensus protocols.

pub mod adversary;
pub mod dag;
pub mod effect;
pub mod ids;
pub mod message;
pub mod params;
pub mod party;
pub mod sim;
pub mod snowball;
pub mod trace;
pub mod variants;
pub mod analysis;
pub mod scenario;
pub mod sweep;
