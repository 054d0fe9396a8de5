//! The named deterministic random number generator used everywhere in this
//! toolkit: SplitMix64.
//!
//! SplitMix64 is counter-based: the state is a plain 64-bit counter advanced
//! by the golden-ratio increment `0x9E3779B97F4A7C15`, and each output is a
//! fixed avalanche mix of that counter. The constants below are the published
//! reference constants, so a seed reproduces the identical stream in any
//! implementation of the generator, in any language.
//!
//! Independent streams (one per distributed node, for example) are derived
//! with [`derive_stream`], never by reusing offsets of the parent stream.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Reference SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for an independent child stream.
///
/// The rule is `mix64(seed XOR mix64((stream_id + 1) * GOLDEN_GAMMA))`: the
/// stream id is avalanched before the XOR so that adjacent ids land in
/// unrelated regions of the counter space.
#[inline]
pub fn derive_stream(seed: u64, stream_id: u64) -> u64 {
    mix64(seed ^ mix64(stream_id.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// SplitMix64 generator state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Raw counter value, for serializing generator state.
    pub fn state(&self) -> u64 {
        self.state
    }

    /// Restore a generator from a previously captured state.
    pub fn from_state(state: u64) -> Self {
        Self { state }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform double in [0, 1) with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [0, n). Uses the fixed-point multiply reduction,
    /// which is deterministic and unbiased to within 2^-64.
    #[inline]
    pub fn next_range(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal deviate via the Marsaglia polar method.
    ///
    /// The second deviate of each accepted pair is discarded so the state
    /// stays a single u64 (no pending-value cache to serialize).
    pub fn next_gaussian(&mut self) -> f64 {
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                return u * (-2.0 * s.ln() / s).sqrt();
            }
        }
    }

    /// Seeded Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_range(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// FNV-1a 64-bit hash with the published offset basis and prime.
///
/// Pinned here (rather than any runtime-dependent `hash()`) so that
/// hash-based shard assignment is identical across machines and runs.
#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
