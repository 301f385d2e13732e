//! Seed derivation for reproducible, order-independent parallel jobs.
//!
//! Every random stream in the crate is a ChaCha8 generator whose key is
//! `splitmix64(master ^ splitmix64(domain))` and whose ChaCha stream id is the
//! job index. A job therefore draws the same numbers regardless of which thread
//! runs it or in which order jobs are scheduled, and distinct `(domain, index)`
//! pairs never share a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating independent uses of one master seed.
pub mod domain {
    pub const BASIS_SEEDS: u64 = 0x6261_7369_735f_7365;
    pub const SHOTS: u64 = 0x7368_6f74_735f_5f5f;
    pub const SPLIT: u64 = 0x7370_6c69_745f_5f5f;
    pub const FEATURES: u64 = 0x6665_6174_7572_6573;
    pub const REFERENCE: u64 = 0x7265_665f_7468_6574;
    pub const HAAR: u64 = 0x6861_6172_5f5f_5f5f;
    pub const BASELINE: u64 = 0x6261_7365_6c69_6e65;
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent generator for job `index` of `domain` under `master`.
pub fn stream(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(master ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// A derived 64-bit seed, for APIs that take a seed instead of a generator.
pub fn derive_seed(master: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(domain)) ^ splitmix64(index.wrapping_add(1)))
}
