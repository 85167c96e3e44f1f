//! Reproducible random streams.
//!
//! Every random draw in a simulation comes from a ChaCha stream keyed by
//! `(master seed, replication)` with the stream id set by [`Purpose`]. ChaCha
//! is counter based, so streams never overlap and a round can seek to a
//! fixed word offset regardless of how much earlier rounds consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Words of keystream reserved per round by [`RoundStreams::at_round`].
pub const WORDS_PER_ROUND: u128 = 1 << 12;

/// What a stream is used for. The discriminant is the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Contexts = 0,
    Rewards = 1,
    Policy = 2,
    /// Draws of the ground-truth parameter.
    Instance = 3,
    /// Probe directions and other validation-only randomness.
    Validation = 4,
}

/// Key material for one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStreams {
    pub master_seed: u64,
    pub replication: u64,
}

impl SeedStreams {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        SeedStreams {
            master_seed,
            replication,
        }
    }

    /// Independent generator for `purpose`, positioned at the stream start.
    pub fn stream(&self, purpose: Purpose) -> StreamRng {
        let mut key = [0u8; 32];
        let mut state = self.master_seed ^ 0x6a09_e667_f3bc_c908;
        for (i, chunk) in key.chunks_mut(8).enumerate() {
            if i == 2 {
                state ^= self.replication.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            }
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = StreamRng::from_seed(key);
        rng.set_stream(purpose as u64);
        rng
    }
}

/// Per-round positioning on top of a stream, so draws for round `t` do not
/// depend on how many words rounds before it used.
#[derive(Debug, Clone)]
pub struct RoundStreams {
    rng: StreamRng,
}

impl RoundStreams {
    pub fn new(rng: StreamRng) -> Self {
        RoundStreams { rng }
    }

    /// Generator seeked to the block reserved for round `t`.
    pub fn at_round(&mut self, t: usize) -> &mut StreamRng {
        self.rng.set_word_pos(t as u128 * WORDS_PER_ROUND);
        &mut self.rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
