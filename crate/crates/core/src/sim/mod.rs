//! Deterministic discrete-event simulation of parties over an asynchronous network.

pub mod net;
pub mod queue;
pub mod rng;
pub mod world;

pub use net::{DelayModel, NetworkConfig};
pub use world::{Honest, World};
