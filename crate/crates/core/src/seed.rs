//! Seed splitting.
//!
//! Every random stream in the crate is derived from one master seed with
//! [`derive_seed`]: the purpose string is hashed with 64-bit FNV-1a, combined
//! with the master seed and the stream index, and passed through the
//! SplitMix64 finalizer. The rule is fixed so that runs are reproducible
//! across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of stream `(purpose, index)` from `master`.
pub fn derive_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let h = splitmix64(master ^ fnv1a(purpose.as_bytes()));
    splitmix64(h ^ splitmix64(index))
}

/// The RNG used for all sampling in the crate.
pub fn stream(master: u64, purpose: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, purpose, index))
}
