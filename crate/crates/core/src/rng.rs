//! Seeded, stream-addressable random sources.
//!
//! Every consumer of randomness (a node, a branch, a noise channel) gets its
//! own ChaCha8 stream keyed by `(seed, stream)`, so results do not depend on
//! the order in which parallel work is scheduled.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hierarchical stream identifier folded into a single 64-bit stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub const ROOT: StreamKey = StreamKey(0x51_7c_c1_b7_27_22_0a_95);

    pub fn new(id: u64) -> Self {
        StreamKey(id)
    }

    /// Derive a child key. Distinct `(parent, component)` pairs give
    /// independent-looking ids.
    pub fn child(self, component: u64) -> Self {
        StreamKey(splitmix64(self.0 ^ splitmix64(component.wrapping_add(0x9e37_79b9))))
    }

    /// Convenience for keys built from a path of components.
    pub fn path(components: &[u64]) -> Self {
        components
            .iter()
            .fold(StreamKey::ROOT, |key, &c| key.child(c))
    }

    pub fn id(self) -> u64 {
        self.0
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A single reproducible random stream.
///
/// Not meant to be shared across concurrent consumers; derive one sampler per
/// node/branch with [`ShotSampler::fork`] instead.
#[derive(Debug, Clone)]
pub struct ShotSampler {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl ShotSampler {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        ShotSampler { seed, stream, rng }
    }

    pub fn from_key(seed: u64, key: StreamKey) -> Self {
        Self::new(seed, key.id())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh sampler on a child stream of this one (same seed).
    pub fn fork(&self, component: u64) -> ShotSampler {
        ShotSampler::new(self.seed, StreamKey(self.stream).child(component).id())
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

impl RngCore for ShotSampler {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
