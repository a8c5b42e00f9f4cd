//! Deterministic counter-based RNG for the simulation harness.
//!
//! Output `i` is a pure function of `(seed, i)`, so independent streams are
//! built by handing out disjoint counter ranges with no coordination. Not
//! cryptographically secure.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Counter-based generator with explicit state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Start a stream at an absolute counter position.
    pub fn with_counter(seed: u64, counter: u64) -> Self {
        Self { seed, counter }
    }

    /// Number of draws consumed since the stream start.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        let z = self.seed.wrapping_add(self.counter.wrapping_mul(GOLDEN));
        mix(z)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform integer in `[0, n)`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Fair sign flip.
    #[inline]
    pub fn sign(&mut self) -> i8 {
        if self.next_u64() & 1 == 0 {
            1
        } else {
            -1
        }
    }
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
