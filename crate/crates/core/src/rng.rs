//! Deterministic RNG derivation.
//!
//! Every source of randomness in the crate is a ChaCha8 stream derived from
//! a root seed plus a small set of integer tags. Distinct tags yield
//! statistically independent streams, so e.g. changing the number of rollouts
//! per scenario never disturbs the scenario's reward draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for the per-scenario sub-streams.
pub mod stream {
    /// Process parameter sampling (μ, intervals, shifts, ...).
    pub const PARAMS: u64 = 1;
    /// Per-round reward noise.
    pub const REWARDS: u64 = 2;
    /// Rollout perturbations and bandit action sampling; rollout `l` uses
    /// sub-stream `PERTURB + l`.
    pub const PERTURB: u64 = 3;
    /// Monte-Carlo mean estimation.
    pub const MC_MEAN: u64 = 1 << 32;
}

/// splitmix64 finalizer; used to mix tags into seeds.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and a tag. Chain calls to build a tree of
/// independent seeds, e.g. `mix(mix(root, iteration), scenario_index)`.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag.wrapping_add(0x51ed_2701_89cd_ef01)))
}

/// A ChaCha8 generator on stream `stream` of the cipher keyed by `seed`.
/// Streams with distinct tags never overlap.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
