//! Seeded, splittable random streams.
//!
//! Every Monte Carlo routine partitions its sample index space into fixed
//! batches and gives each batch its own ChaCha stream, so results do not
//! depend on how many threads pick up the work.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Samples per independent stream in the batched estimators.
pub const BATCH_SIZE: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    /// A child stream, distinct for every `(self, tag)` pair.
    pub fn substream(self, tag: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ splitmix64(self.stream)),
            stream: tag,
        }
    }

    /// A child stream keyed by name (FNV-1a of the bytes).
    pub fn named(self, name: &str) -> Self {
        let tag = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
        });
        self.substream(tag)
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        Self::new(seed)
    }
}

/// Splits `0..n` into `(batch_index, start, len)` chunks of [`BATCH_SIZE`].
pub(crate) fn batches(n: usize) -> impl Iterator<Item = (u64, usize)> {
    (0..n.div_ceil(BATCH_SIZE)).map(move |b| {
        let start = b * BATCH_SIZE;
        (b as u64, (n - start).min(BATCH_SIZE))
    })
}
