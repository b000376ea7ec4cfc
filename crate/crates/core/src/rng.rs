//! Deterministic substream derivation.
//!
//! Every random draw in this crate comes from a ChaCha12 stream whose seed is
//! derived from a master seed plus a list of integer tags (location index,
//! bisection step, chunk index, ...). Two consequences:
//!
//! * identical `(master, tags)` always produce identical draws, on every
//!   platform and at every thread count;
//! * independent work items never share a stream, so parallel execution
//!   cannot reorder anybody's randomness.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Tag namespaces, one per call site that derives substreams. Keeping them
/// distinct means a (location, step) pair used by two different components
/// can never collide on the same stream.
pub(crate) mod tag {
    pub const MC_CHUNK: u64 = 0x4d43_4348; // Monte Carlo sample chunk
    pub const SOFT_SEARCH: u64 = 0x534f_4654; // per-location bisection probes
    pub const SCENARIO_REQ: u64 = 0x5245_5131; // requirement matrix draw
    pub const SCENARIO_ALPHA: u64 = 0x414c_5048; // per-location alpha draw
    pub const RANDOM_POLICY: u64 = 0x524e_444d; // baseline random policy
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Collapse `(master, tags)` into a single 64-bit stream identifier.
pub fn substream_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = master ^ 0x6a09_e667_f3bc_c908;
    let mut acc = splitmix64(&mut state);
    for &t in tags {
        state ^= t;
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// A ChaCha12 generator seeded from `(master, tags)`.
pub fn substream(master: u64, tags: &[u64]) -> ChaCha12Rng {
    let mut state = substream_seed(master, tags);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
///
/// Done by hand on the raw 64-bit output so the mapping is pinned by this
/// crate rather than by whatever distribution API the RNG crate ships.
pub fn uniform_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform integer in `[low, high]` (inclusive).
///
/// Modulo bias is below 2e-17 for the ranges used here (spans < 2^10).
pub fn uniform_u32<R: RngCore>(rng: &mut R, low: u32, high: u32) -> u32 {
    debug_assert!(low <= high);
    let span = (high - low) as u64 + 1;
    low + (rng.next_u64() % span) as u32
}
