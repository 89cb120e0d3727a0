//! Counter-based SplitMix64 generator.
//!
//! Every random value is a pure function of `(seed, stream, counter)`:
//!
//! ```text
//! key    = mix(seed XOR mix(stream))
//! value  = mix(key + (counter + 1) * 0x9e3779b97f4a7c15)     // mod 2^64
//! mix(z) = SplitMix64 finalizer:
//!     z = (z XOR (z >> 30)) * 0xbf58476d1ce4e5b9
//!     z = (z XOR (z >> 27)) * 0x94d049bb133111eb
//!     z =  z XOR (z >> 31)
//! ```
//!
//! [`Stream`] walks `counter = 0, 1, 2, ...`, which makes it identical to a
//! SplitMix64 generator whose state starts at `key`. Uniform reals take the
//! top 53 bits: `(value >> 11) * 2^-53`, so they lie in `[0, 1)`.

use crate::bloom::splitmix_finalize as mix;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn key(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream))
}

/// The value at `counter` of stream `stream` under `seed`.
pub fn draw(seed: u64, stream: u64, counter: u64) -> u64 {
    mix(key(seed, stream).wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn to_unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential view over one stream.
#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Stream {
            state: key(seed, stream),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        to_unit(self.next_u64())
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Poisson variate. The mean is split into chunks of at most 16, each
    /// sampled by Knuth's product-of-uniforms method, and the chunks summed.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        const CHUNK: f64 = 16.0;
        let mut remaining = mean.max(0.0);
        let mut total = 0;
        while remaining > 0.0 {
            let lambda = remaining.min(CHUNK);
            remaining -= lambda;
            let limit = (-lambda).exp();
            let mut product = self.next_f64();
            while product > limit {
                total += 1;
                product *= self.next_f64();
            }
        }
        total
    }
}
