//! SplitMix64 streams keyed by `(seed, sample index)`.
//!
//! Every sample owns an independent stream, so results never depend on the
//! order in which samples are computed or on the number of worker threads.

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 step applied to `state`: add the gamma, then mix.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        Self { state }
    }

    /// Stream for sample `index` (0-based) of a run seeded with `seed`.
    ///
    /// The initial state is `splitmix64(seed ^ (index + 1) * GOLDEN_GAMMA)`.
    pub fn for_sample(seed: u64, index: u64) -> Self {
        let key = seed ^ index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA);
        Self::new(splitmix64(key))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` by scaling a 53-bit uniform.
    #[inline]
    pub fn below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        let j = (self.next_f64() * bound as f64) as usize;
        j.min(bound - 1)
    }
}
