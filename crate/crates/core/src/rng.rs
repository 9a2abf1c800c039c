//! Seed hierarchy.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] whose key is
//! derived from a root seed plus a path of integers. Distinct paths give
//! independent streams, so adding or reordering consumers in one part of the
//! pipeline never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domain tags. Kept stable: changing one changes every output.
pub mod domain {
    pub const FEATURE_WEIGHTS: u64 = 0x5745_4947;
    pub const FEATURE_BIASES: u64 = 0x4249_4153;
    pub const GIBBS: u64 = 0x4749_4242;
    pub const PREDICTIVE: u64 = 0x5052_4544;
    pub const OBSERVATION_NOISE: u64 = 0x4e4f_4953;
    pub const ENSEMBLE: u64 = 0x454e_5345;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A node in the seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedTree {
    key: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self {
            key: splitmix64(seed ^ 0x7266_626c_7400_0000),
        }
    }

    /// Child node for `index`.
    pub fn child(&self, index: u64) -> Self {
        Self {
            key: splitmix64(self.key ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019))),
        }
    }

    /// Child node reached by following every index in `path`.
    pub fn descend(&self, path: &[u64]) -> Self {
        path.iter().fold(*self, |node, &i| node.child(i))
    }

    /// Derived 64-bit seed, e.g. for recording in manifests.
    pub fn seed(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> StreamRng {
        let mut bytes = [0u8; 32];
        let mut k = self.key;
        for chunk in bytes.chunks_exact_mut(8) {
            k = splitmix64(k);
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }

    pub fn stream(&self, path: &[u64]) -> StreamRng {
        self.descend(path).rng()
    }
}
