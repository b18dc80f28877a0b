//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by the run seed plus a short path of stream labels, so any stream
//! can be recreated without replaying the ones before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: &[u64]) -> u64 {
    stream.iter().fold(splitmix64(master), |acc, &s| {
        splitmix64(acc ^ splitmix64(s))
    })
}

pub fn stream(master: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
