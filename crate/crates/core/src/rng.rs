//! Seed derivation. One root seed fans out into independent streams keyed by
//! purpose and coordinates, so adding or removing one kind of sampling never
//! shifts the random numbers another kind sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    TaskGen = 1,
    Batch = 2,
    Rollout = 3,
    Eval = 4,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a root seed, a stream tag and coordinates into one 64-bit seed.
pub fn derive_seed(root: u64, stream: Stream, coords: &[u64]) -> u64 {
    let mut h = splitmix64(root ^ splitmix64(stream as u64));
    for &c in coords {
        h = splitmix64(h ^ splitmix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(root: u64, stream: Stream, coords: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, stream, coords))
}
