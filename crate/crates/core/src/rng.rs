//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator whose 256-bit
//! key is derived from `(seed, purpose tag)`:
//!
//! ```text
//! h      = FNV-1a-64(tag bytes)
//! state  = seed XOR h
//! key[k] = splitmix64(state + (k+1) * 0x9E3779B97F4A7C15),  k = 0..4
//! ```
//!
//! The four 64-bit words are written little-endian into the 32-byte seed.
//! ChaCha8 output and the `rand` sampling algorithms are platform independent,
//! so identical `(seed, tag)` pairs give identical streams everywhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a user seed with a purpose tag into a 64-bit stream id.
pub fn stream_id(seed: u64, tag: &str) -> u64 {
    splitmix64(seed ^ fnv1a(tag.as_bytes()))
}

/// Generator for one purpose. Distinct tags give independent streams.
pub fn stream(seed: u64, tag: &str) -> Rng {
    let state = seed ^ fnv1a(tag.as_bytes());
    let mut key = [0u8; 32];
    for k in 0..4 {
        let word = splitmix64(state.wrapping_add((k as u64 + 1).wrapping_mul(GOLDEN)));
        key[k * 8..(k + 1) * 8].copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
