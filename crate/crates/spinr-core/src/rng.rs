//! Deterministic random-number plumbing.
//!
//! Every stochastic consumer in the toolkit (weight init, attack sampling,
//! packet-loss simulation, synthetic image generation) draws from its own
//! ChaCha8 stream derived from a single user-facing seed. Streams keep the
//! consumers independent: adding attack trials never perturbs the weights a
//! given seed produces, and vice versa.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for parameter initialization.
pub const STREAM_INIT: u64 = 1;
/// Stream id for robustness attacks (neuron loss, parameter noise).
pub const STREAM_ATTACK: u64 = 2;
/// Stream id for the lossy packet channel.
pub const STREAM_CHANNEL: u64 = 3;
/// Stream id for synthetic image generation.
pub const STREAM_SYNTH: u64 = 4;

/// RNG for `consumer` under `seed`.
pub fn stream_rng(seed: u64, consumer: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(consumer);
    rng
}

/// RNG for one trial of a repeated experiment. Each (consumer, trial) pair
/// gets its own substream so trials can run in any order or in isolation
/// and still reproduce bit-identically.
pub fn trial_rng(seed: u64, consumer: u64, trial: u64) -> ChaCha8Rng {
    stream_rng(seed, (consumer << 32) | trial)
}
