//! Counter-based random streams.
//!
//! Every random draw in the filter comes from a stream addressed by
//! `(root seed, epoch, index)`, so results do not depend on the order in
//! which particles are processed or on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Streams reserved past the particle index range.
pub const RESAMPLE_STREAM: u64 = u64::MAX;
pub const INIT_STREAM: u64 = u64::MAX - 1;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed, e.g. one per lap from a run's root seed.
pub fn derive_seed(root: u64, label: u64) -> u64 {
    splitmix64(root ^ splitmix64(label))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamSeed(pub u64);

impl StreamSeed {
    pub fn stream(&self, epoch: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.0, epoch));
        rng.set_stream(index);
        rng
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
