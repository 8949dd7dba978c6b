//! Counter-based seeding.
//!
//! Every random stream is addressed by `(root seed, job tag, replicate index)`.
//! The root seed and tag are hashed into a ChaCha key and the replicate index
//! selects the ChaCha stream, so the numbers a replicate sees never depend on
//! how replicates are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A named family of random streams derived from a root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    key: u64,
}

impl SeedStream {
    pub fn new(root: u64, tag: &str) -> Self {
        let mut s = root ^ fnv1a(tag.as_bytes()).rotate_left(17);
        let key = splitmix64(&mut s) ^ splitmix64(&mut s);
        Self { key }
    }

    /// Derive a sub-family, e.g. one per x-level inside a verification job.
    pub fn child(&self, tag: &str) -> Self {
        Self::new(self.key, tag)
    }

    /// Scalar job seed (the value recorded in reports).
    pub fn seed(&self) -> u64 {
        self.key
    }

    pub fn rng(&self, replicate: u64) -> SimRng {
        let mut s = self.key;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(replicate);
        rng
    }
}
