//! Deterministic random-stream derivation for experiments.
//!
//! Every run owns two independent streams — one for the environment (schedule
//! construction and reward draws), one for the algorithm's own coins — so
//! that changing the algorithm never perturbs the environment's randomness
//! and vice versa. Streams are keyed by `(base_seed, replication, purpose)`
//! and mixed through SplitMix64 before seeding ChaCha, so adjacent seeds and
//! replication indices still yield unrelated streams.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Which of a run's independent random streams to derive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Schedule construction and per-round reward draws.
    Environment,
    /// The algorithm's exploration coins.
    Algorithm,
}

const REPLICATION_MIX: u64 = 0xA24B_AED4_963E_E407;
const PURPOSE_MIX: u64 = 0x9FB2_1C65_1E98_DF25;

fn split_mix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the ChaCha stream for `(base_seed, replication, purpose)`.
pub fn derive_stream(base_seed: u64, replication: u64, purpose: StreamPurpose) -> ChaCha12Rng {
    let purpose_index = match purpose {
        StreamPurpose::Environment => 1u64,
        StreamPurpose::Algorithm => 2u64,
    };
    let mut state = base_seed
        ^ replication.wrapping_mul(REPLICATION_MIX)
        ^ purpose_index.wrapping_mul(PURPOSE_MIX);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&split_mix_next(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
