//! Counter-based seeding so every trial owns an independent generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `(master, stream, counter)` into a single 64-bit seed.
pub fn mix_seed(master: u64, stream: u64, counter: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ counter)
}

/// Generator for trial `counter` of stream `stream` (e.g. an SNR index).
pub fn trial_rng(master: u64, stream: u64, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(master, stream, counter))
}
