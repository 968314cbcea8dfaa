//! Counter-based random streams.
//!
//! Every random draw in the toolkit is addressed by `(seed, domain, index)`.
//! A region's phase depends only on its lattice coordinate, never on the
//! order in which regions or trials are visited, so parallel evaluation and
//! re-evaluation of a single region give bit-identical values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Domain tag for base source phases.
pub const DOMAIN_PHASE: u64 = 0x7068_6173_6500_0001;
/// Domain tag for perturbation offsets.
pub const DOMAIN_PERTURB: u64 = 0x7065_7274_7572_0002;
/// Domain tag for detector noise.
pub const DOMAIN_NOISE: u64 = 0x6e6f_6973_6500_0003;
/// Domain tag for per-trial seeds.
pub const DOMAIN_TRIAL: u64 = 0x7472_6961_6c00_0004;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from `(base, domain, index)`.
pub fn derive_seed(base: u64, domain: u64, index: u64) -> u64 {
    mix64(mix64(base ^ mix64(domain)).wrapping_add(index))
}

/// Seed for trial `index` of an ensemble rooted at `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    derive_seed(base, DOMAIN_TRIAL, index)
}

/// A keyed family of ChaCha streams; one stream per 2-D lattice coordinate.
#[derive(Clone, Debug)]
pub struct StreamFamily {
    key: [u8; 32],
}

impl StreamFamily {
    pub fn new(seed: u64, domain: u64) -> Self {
        let mut key = [0u8; 32];
        let mut state = seed ^ mix64(domain);
        for chunk in key.chunks_exact_mut(8) {
            state = mix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        Self { key }
    }

    /// Stream for lattice coordinate `(i, j)`.
    pub fn at(&self, i: i32, j: i32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(((i as u32 as u64) << 32) | j as u32 as u64);
        rng
    }

    /// Stream for a flat index.
    pub fn at_index(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

/// Uniform draw on the half-open interval `(-half_width, half_width]`.
#[inline]
pub fn uniform_symmetric<R: Rng>(rng: &mut R, half_width: f64) -> f64 {
    // 53 random bits -> u in [0, 1); 1 - 2u lies in (-1, 1].
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    half_width * (1.0 - 2.0 * u)
}

/// Reduces an angle to `(-pi, pi]`.
#[inline]
pub fn wrap_phase(phi: f64) -> f64 {
    use std::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let mut r = phi % two_pi;
    if r > PI {
        r -= two_pi;
    } else if r <= -PI {
        r += two_pi;
    }
    r
}
