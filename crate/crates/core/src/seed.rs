//! Deterministic per-trial random streams.
//!
//! Every Monte Carlo estimator in the crate takes a single 64-bit master seed.
//! Trial `t` draws from its own stream whose seed is
//!
//! ```text
//! stream_seed(master, t) = splitmix64(master ^ splitmix64(t))
//! splitmix64(x):
//!     z = x + 0x9E3779B97F4A7C15            (wrapping)
//!     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!     return z ^ (z >> 31)
//! ```
//!
//! and the stream itself is `ChaCha8Rng::seed_from_u64(stream_seed)` from
//! `rand_chacha` 0.3. Uniform reals are `rand`'s standard `f64` sampler
//! (`(u64 >> 11) * 2^-53`), so a stream is reproducible from these constants
//! alone. Aggregations always run in ascending trial order, which keeps
//! results bit-identical no matter how the trials were scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The random stream type used for all trials.
pub type TrialRng = ChaCha8Rng;

pub const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
pub const SPLITMIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
pub const SPLITMIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

/// Trial index reserved for auxiliary draws that are not tied to a trial
/// (for instance the start points of a membership test).
pub const AUX_STREAM: u64 = u64::MAX;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(SPLITMIX_MUL_1);
    z = (z ^ (z >> 27)).wrapping_mul(SPLITMIX_MUL_2);
    z ^ (z >> 31)
}

pub fn stream_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master ^ splitmix64(trial))
}

pub fn rng_from_seed(seed: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn trial_rng(master: u64, trial: u64) -> TrialRng {
    rng_from_seed(stream_seed(master, trial))
}

/// Index of the first cumulative weight exceeding a uniform draw.
pub(crate) fn sample_index<R: Rng>(rng: &mut R, cumulative: &[f64]) -> usize {
    let u: f64 = rng.gen();
    match cumulative.iter().position(|&c| u < c) {
        Some(i) => i,
        None => cumulative.len() - 1,
    }
}

pub(crate) fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        // absorb rounding so that every draw in [0,1) lands on an atom
        *last = f64::INFINITY;
    }
    out
}
