//! Seed derivation for named random sub-streams.
//!
//! Every random quantity in a run flows from one 64-bit seed. A sub-stream seed is
//! `splitmix64(seed ^ fnv1a64(name))`, so streams with different names are
//! decorrelated and adding a new stream never shifts an existing one. Per-chain
//! MCMC generators additionally select the ChaCha stream number equal to the chain
//! index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the sub-stream `name` under the root `seed`.
pub fn substream(seed: u64, name: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(name.as_bytes()))
}

/// Seed of the `index`-th member of a family of sub-streams (e.g. one per AMF round).
pub fn indexed(seed: u64, name: &str, index: u64) -> u64 {
    splitmix64(substream(seed, name) ^ splitmix64(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(seed: u64, name: &str) -> ChaCha8Rng {
    rng(substream(seed, name))
}
