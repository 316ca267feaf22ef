//! Seedable random number streams and the distribution kernels the samplers
//! need: Pólya-Gamma, truncated normal, inverse gamma, and multivariate
//! normal parameterized by precision.
//!
//! Every stochastic routine in this crate draws from an explicit
//! [`RngStream`]. Streams are derived by key rather than by splitting state,
//! so a run decomposes into a tree of independent generators: replicate `k`
//! sees the same stream no matter how many worker threads execute the run or
//! in which order they finish.

pub mod gaussian;
pub mod polya_gamma;
pub mod univariate;

pub use gaussian::{draw_mvn_precision, PrecisionGaussian};
pub use polya_gamma::{draw_polya_gamma, polya_gamma_mean, polya_gamma_var, PolyaGamma};
pub use univariate::{draw_inverse_gamma, draw_truncated_normal};

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function; advances `state` and returns one mixed word.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a (parent key, child id) pair into a child key.
fn derive_key(parent: u64, child: u64) -> u64 {
    let mut s = parent;
    let mixed_parent = splitmix64(&mut s);
    let mut s2 = mixed_parent ^ child;
    splitmix64(&mut s2)
}

/// A deterministic random stream with cheap, non-consuming substream
/// derivation.
///
/// The stream key is hashed into a 256-bit ChaCha8 seed, so distinct
/// `(seed, stream_id)` pairs give statistically independent sequences while
/// identical pairs give bit-identical ones.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    /// Root stream for a run: `seed` is the user-facing seed, `stream_id`
    /// names the top-level consumer (chain, replicate, subsystem).
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self::from_key(derive_key(seed, stream_id))
    }

    fn from_key(key: u64) -> Self {
        let mut s = key;
        let mut seed_bytes = [0u8; 32];
        for chunk in seed_bytes.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        RngStream {
            key,
            rng: ChaCha8Rng::from_seed(seed_bytes),
        }
    }

    /// Child stream `i`. Derivation is keyed off the parent's identity, not
    /// its position, so it consumes no randomness from `self` and the same
    /// `i` always yields the same child.
    pub fn substream(&self, i: u64) -> Self {
        Self::from_key(derive_key(self.key, i))
    }

    /// Uniform draw on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.rng)
    }

    /// Uniform draw on [lo, hi).
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        rand::Rng::sample(&mut self.rng, rand_distr::StandardNormal)
    }

    /// Unit-rate exponential draw.
    pub fn exponential(&mut self) -> f64 {
        rand::Rng::sample(&mut self.rng, rand_distr::Exp1)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
