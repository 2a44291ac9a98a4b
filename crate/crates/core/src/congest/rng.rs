//! Keyed random streams.
//!
//! A stream is addressed by `(seed, tag, index)`. The same address always
//! yields the same sequence, and distinct addresses are independent for all
//! practical purposes (ChaCha8 keyed by a mixed 256-bit seed).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The generator for one `(tag, index)` address under this seed.
    pub fn stream(&self, tag: &str, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.seed ^ fnv1a(tag.as_bytes()).rotate_left(17);
        for chunk in key.chunks_mut(8) {
            state = splitmix(state ^ index);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}
