//! Seedable, splittable random streams.
//!
//! Every consumer of randomness asks for a named substream of a master seed,
//! so changing how many draws one estimator makes never shifts the draws seen
//! by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator handed to samplers, solvers and estimators.
pub type RngStream = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream_id(name: &str, index: u64) -> u64 {
    let mut h = FNV_OFFSET;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h ^ splitmix64(index))
}

/// Root of a family of independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream identified by `(name, index)`.
    pub fn stream(&self, name: &str, index: u64) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream_id(name, index));
        rng
    }

    /// Child tree, for nesting (experiment → run → epoch).
    pub fn child(&self, name: &str, index: u64) -> SeedTree {
        SeedTree::new(splitmix64(self.seed ^ stream_id(name, index)))
    }
}
