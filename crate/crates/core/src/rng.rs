//! Seed derivation and named random substreams.
//!
//! A single `u64` seed is expanded into independent ChaCha8 streams, one per
//! stochastic subsystem. Each stream is keyed by `(seed, Stream, index)`, so
//! drawing more numbers from one subsystem never shifts another's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used for every substream.
pub type StreamRng = ChaCha8Rng;

/// Names of the stochastic subsystems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Spawn,
    Sensing,
    /// Heading noise of a scripted red UAV; `index` is the entity id.
    RedNoise,
    Exploration,
    NetInit,
    ReplaySampling,
    /// Per-episode seeds within a batch; `index` is the episode number.
    Episode,
    TrainEpisode,
    Evaluation,
}

impl Stream {
    const fn tag(self) -> u64 {
        match self {
            Stream::Spawn => 0x5350_4157_4e00_0001,
            Stream::Sensing => 0x5345_4e53_4500_0002,
            Stream::RedNoise => 0x5245_444e_4f00_0003,
            Stream::Exploration => 0x4558_504c_4f00_0004,
            Stream::NetInit => 0x4e45_5449_4e00_0005,
            Stream::ReplaySampling => 0x5250_4c59_5300_0006,
            Stream::Episode => 0x4550_4953_4f00_0007,
            Stream::TrainEpisode => 0x5452_4149_4e00_0008,
            Stream::Evaluation => 0x4556_414c_5500_0009,
        }
    }
}

#[inline]
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed. Pure function of its arguments.
pub fn derive_seed(base: u64, stream: Stream, index: u64) -> u64 {
    let h = splitmix64(base);
    let h = splitmix64(h ^ stream.tag());
    splitmix64(h ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Opens the substream `(base, stream, index)`.
pub fn stream_rng(base: u64, stream: Stream, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream, index))
}
