//! Seed derivation for independent random streams.
//!
//! Every random draw in the crate comes from a [`Stream`] obtained by
//! hashing a root seed together with a path of integer keys, e.g.
//! `(module, iteration, step, component)`. Two streams with different key
//! paths are statistically independent, and a stream's output depends only
//! on its key path, never on the order in which streams are created or on
//! how many worker threads consume them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Top-level key namespaces.
pub mod domain {
    pub const SIMULATE: u64 = 1;
    pub const RATIO: u64 = 2;
    pub const DPM: u64 = 3;
    pub const SYNTH: u64 = 4;
    pub const ASSESS: u64 = 5;
    pub const SWEEP: u64 = 6;
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream {
            key: splitmix64(seed ^ 0x6A09_E667_F3BC_C908),
        }
    }

    /// Child stream for one more level of the key path.
    pub fn child(&self, key: u64) -> Self {
        Stream {
            key: splitmix64(self.key.rotate_left(17) ^ splitmix64(key.wrapping_add(0x3C6E_F372_FE94_F82B))),
        }
    }

    pub fn derive(&self, keys: &[u64]) -> Self {
        keys.iter().fold(*self, |s, &k| s.child(k))
    }

    /// A 64-bit seed for APIs that take a plain integer.
    pub fn seed(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> StreamRng {
        let mut bytes = [0u8; 32];
        let mut k = self.key;
        for chunk in bytes.chunks_mut(8) {
            k = splitmix64(k);
            chunk.copy_from_slice(&k.to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }
}
