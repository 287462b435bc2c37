//! Counter-based keyed generator.
//!
//! Every random word is a pure function of `(key, stream, index, counter)`, so
//! parameters for any host vector can be derived in any order or in parallel.
//! Transcendental functions come from `libm` so results agree across platforms.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer: a bijective 64-bit mixing permutation.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the bytes of `s`.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Keyed stream of words addressed by `(index, counter)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self {
            key: mix64(mix64(seed) ^ stream.wrapping_mul(GOLDEN)),
        }
    }

    #[inline]
    pub fn word(&self, index: u64, counter: u64) -> u64 {
        mix64(mix64(self.key ^ mix64(index)) ^ counter)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&self, index: u64, counter: u64) -> f64 {
        (self.word(index, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box–Muller; consumes counters `2c` and `2c + 1`.
    pub fn gaussian(&self, index: u64, counter: u64) -> f64 {
        let u1 = 1.0 - self.uniform(index, 2 * counter);
        let u2 = self.uniform(index, 2 * counter + 1);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(std::f64::consts::TAU * u2)
    }
}
