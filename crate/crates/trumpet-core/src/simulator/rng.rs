//! Counter-based random substreams, one per physical process.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Brownian forcing of mode `k`.
    Mechanics(u32),
    Blinking,
    Thinning,
    Routing,
    Jitter,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Blinking => 1,
            Stream::Thinning => 2,
            Stream::Routing => 3,
            Stream::Jitter => 4,
            Stream::Mechanics(k) => 0x1_0000 + k as u64,
        }
    }
}

/// ChaCha8 keyed by `seed`, positioned on the stream of `process`.
pub fn substream(seed: u64, process: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(process.id());
    rng
}

/// Derives an independent seed for the `index`-th sub-run (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
