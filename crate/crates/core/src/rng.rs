//! Seed derivation for independent random streams.
//!
//! Every stream is keyed by `(master seed, trial index, stream tag)`, so the
//! environment path of a trial never depends on which policy consumes it or
//! on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Named random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Function draws `g_t` of the environment.
    Environment,
    /// Observation noise `z_t`.
    Noise,
    /// Policy randomness (the random baseline).
    Policy,
    /// Instance generation for randomized checks.
    Instance,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Environment => 0x656e_7669,
            Stream::Noise => 0x6e6f_6973,
            Stream::Policy => 0x706f_6c69,
            Stream::Instance => 0x696e_7374,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, trial: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ trial) ^ stream.tag())
}

pub fn stream_rng(master: u64, trial: u64, stream: Stream) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, trial, stream))
}
