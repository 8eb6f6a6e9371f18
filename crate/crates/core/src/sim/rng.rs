use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::ids::PartyId;

/// Independent random streams derived from one master seed.
///
/// Each (subsystem, party) pair gets its own ChaCha stream, so adding a party
/// or a subsystem never shifts the draws seen by another.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Party = 1,
    Delay = 2,
    Adversary = 3,
    Workload = 4,
    MonteCarlo = 5,
}

pub fn stream(seed: u64, which: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((which as u64) << 32) | (index & 0xffff_ffff));
    rng
}

pub fn party_stream(seed: u64, which: Stream, party: PartyId) -> ChaCha8Rng {
    stream(seed, which, party.0 as u64)
}
