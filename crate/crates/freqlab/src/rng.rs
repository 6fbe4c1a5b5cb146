//! Counter-based Gaussian noise streams.
//!
//! A `NoiseStream` is an immutable (seed, counter) pair. Every variate is a
//! pure function of that pair, so trajectories are reproducible regardless of
//! evaluation order and parallel Monte-Carlo workers can use disjoint seeds
//! or stream splits without coordination.

/// Immutable handle into a deterministic stream of standard normal variates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub counter: u64,
}

// SplitMix64 finalizer (Vigna). Full 64-bit avalanche, non-cryptographic.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[inline]
fn uniform_open01(bits: u64) -> f64 {
    // 53 mantissa bits mapped to (0, 1]; never 0 so ln() below is safe.
    (((bits >> 11) + 1) as f64) / (1u64 << 53) as f64
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        NoiseStream { seed, counter: 0 }
    }

    /// Derives an independent stream, e.g. one per Monte-Carlo path.
    pub fn split(&self, index: u64) -> NoiseStream {
        NoiseStream {
            seed: mix(self.seed ^ mix(index ^ 0xa5a5_a5a5_5a5a_5a5a)),
            counter: 0,
        }
    }

    /// One standard normal variate plus the advanced stream.
    ///
    /// Identical (seed, counter) always yields the identical value.
    pub fn gaussian(&self) -> (f64, NoiseStream) {
        let base = mix(self.seed) ^ self.counter.wrapping_mul(0x9e3779b97f4a7c15);
        let u1 = uniform_open01(mix(base));
        let u2 = uniform_open01(mix(base ^ 0x6a09_e667_f3bc_c909));
        // Box-Muller, cosine branch.
        let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        (
            z,
            NoiseStream {
                seed: self.seed,
                counter: self.counter + 1,
            },
        )
    }
}
