//! Reproducible random streams.
//!
//! Every random draw in the crate comes from ChaCha8, a counter-based
//! generator whose output is fixed by (key, stream id, word position) and
//! identical on every platform. The key is expanded from a 64-bit master
//! seed; the 64-bit stream id encodes the replicate index and a purpose
//! tag, so each (master, replicate, purpose) triple owns an independent
//! stream regardless of how tasks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use rand_chacha::ChaCha8Rng as StreamRng;

/// What a derived stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    ObservationNoise = 1,
    ParameterInit = 2,
    InitialState = 3,
    Probe = 4,
}

/// Child stream for `(master, index, purpose)`.
pub fn stream(master: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    // 56 bits of index are plenty for replicate counts.
    rng.set_stream((index << 8) | purpose as u64);
    rng
}
