//! Seeded random streams.
//!
//! Every stochastic component draws from its own ChaCha8 stream. A stream is
//! identified by the master seed (the cipher key) and a 64-bit stream id
//! packed from `(replicate, domain, index)`, so distinct ids never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a stream is used for. Part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Graph = 1,
    Instance = 2,
    CliqueCover = 3,
    /// Rewards of one (agent, arm) pair.
    Reward = 4,
    /// Laplace noise of one agent.
    PrivacyNoise = 5,
    /// Source corruption of one agent.
    Corruption = 6,
    Misc = 7,
}

pub fn stream_id(replicate: u32, domain: Domain, index: u32) -> u64 {
    assert!(replicate < (1 << 24), "replicate index out of range");
    (u64::from(replicate) << 40) | (u64::from(domain as u8) << 32) | u64::from(index)
}

pub fn stream(master_seed: u64, replicate: u32, domain: Domain, index: u32) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(replicate, domain, index));
    rng
}

/// Seed for a sub-component that takes a plain `u64` seed (graph generation,
/// instance drawing).
pub fn derive_seed(master_seed: u64, replicate: u32, domain: Domain) -> u64 {
    use rand::RngCore;
    stream(master_seed, replicate, domain, 0).next_u64()
}
