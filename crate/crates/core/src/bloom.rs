//! Bloom filters over canonical access-point ids.
//!
//! ## Hashing
//!
//! Each id is hashed twice, once per seed, with a seeded FNV-1a followed by
//! the SplitMix64 finalizer:
//!
//! ```text
//! h = 0xcbf29ce484222325 XOR seed
//! for byte in canonical_id_utf8:          // "aa:bb:cc:dd:ee:ff", 17 bytes
//!     h = (h XOR byte) * 0x100000001b3    // mod 2^64
//! h = (h XOR (h >> 30)) * 0xbf58476d1ce4e5b9
//! h = (h XOR (h >> 27)) * 0x94d049bb133111eb
//! h =  h XOR (h >> 31)
//! ```
//!
//! With `h1 = hash(id, seed0)` and `h2 = hash(id, seed1)` the probed bit
//! positions are `g_i = (h1 + i * h2) mod m` for `i in 0..k`, evaluated exactly
//! (no 64-bit wraparound). Bit `g` lives in byte `g / 8` at bit `g % 8`,
//! least-significant bit first.

use crate::error::{Error, Result};
use crate::scan::ApId;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeds used when none are given.
pub const DEFAULT_SEEDS: [u64; 2] = [0x243f_6a88_85a3_08d3, 0x1319_8a2e_0370_7344];

pub(crate) fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded 64-bit hash of a byte string.
pub fn seeded_hash(bytes: &[u8], seed: u64) -> u64 {
    let h = bytes.iter().fold(FNV_OFFSET ^ seed, |h, &b| {
        (h ^ b as u64).wrapping_mul(FNV_PRIME)
    });
    splitmix_finalize(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BloomParams {
    m: u64,
    k: u32,
    seeds: [u64; 2],
}

impl BloomParams {
    pub fn new(m: u64, k: u32, seeds: [u64; 2]) -> Result<Self> {
        if m < 8 {
            return Err(Error::BloomParams(format!("m must be at least 8, got {m}")));
        }
        if !(1..=64).contains(&k) {
            return Err(Error::BloomParams(format!("k must lie in 1..=64, got {k}")));
        }
        Ok(BloomParams { m, k, seeds })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn seeds(&self) -> [u64; 2] {
        self.seeds
    }

    pub fn with_seeds(self, seeds: [u64; 2]) -> Self {
        BloomParams { seeds, ..self }
    }

    pub fn byte_len(&self) -> usize {
        self.m.div_ceil(8) as usize
    }

    /// The `k` bit positions probed for `id`.
    pub fn positions(&self, id: &ApId) -> Vec<u64> {
        let bytes = id.as_bytes();
        let h1 = seeded_hash(bytes, self.seeds[0]) as u128;
        let h2 = seeded_hash(bytes, self.seeds[1]) as u128;
        let m = self.m as u128;
        (0..self.k as u128)
            .map(|i| ((h1 + i * h2) % m) as u64)
            .collect()
    }
}

/// False-positive probability `(1 - (1 - 1/m)^(k n))^k`, evaluated without the
/// exponential approximation.
pub fn fp_rate(m: u64, n: u64, k: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // ln((1 - 1/m)^(kn)); -inf when m == 1
    let log_unset = (k as f64) * (n as f64) * (-1.0 / m as f64).ln_1p();
    let set = -log_unset.exp_m1();
    if set <= 0.0 {
        return 0.0;
    }
    (k as f64 * set.ln()).exp()
}

/// Standard sizing: `m = ceil(-n ln p / ln(2)^2)` (at least 8) and
/// `k = round(m/n ln 2)` clamped to `1..=64`.
pub fn size_for(n: u64, target_p: f64) -> Result<BloomParams> {
    if !(target_p > 0.0 && target_p < 1.0) {
        return Err(Error::TargetProbability(target_p));
    }
    if n == 0 {
        return Err(Error::BloomParams(
            "cannot size a filter for zero items".into(),
        ));
    }
    let ln2 = std::f64::consts::LN_2;
    let m = (-(n as f64) * target_p.ln() / (ln2 * ln2)).ceil().max(8.0) as u64;
    let k = ((m as f64 / n as f64) * ln2).round().clamp(1.0, 64.0) as u32;
    BloomParams::new(m, k, DEFAULT_SEEDS)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BloomFilter {
    params: BloomParams,
    bits: Vec<u8>,
    count: u64,
}

impl BloomFilter {
    pub fn new(params: BloomParams) -> Self {
        BloomFilter {
            params,
            bits: vec![0; params.byte_len()],
            count: 0,
        }
    }

    /// Rebuilds a filter from stored bits. `bits` must hold exactly
    /// `ceil(m / 8)` bytes.
    pub fn from_parts(params: BloomParams, bits: Vec<u8>, count: u64) -> Result<Self> {
        if bits.len() != params.byte_len() {
            return Err(Error::BloomParams(format!(
                "expected {} bytes of bits, got {}",
                params.byte_len(),
                bits.len()
            )));
        }
        Ok(BloomFilter {
            params,
            bits,
            count,
        })
    }

    pub fn params(&self) -> &BloomParams {
        &self.params
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of insert calls (not distinct items).
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn popcount(&self) -> u64 {
        self.bits.iter().map(|b| b.count_ones() as u64).sum()
    }

    pub fn insert(&mut self, id: &ApId) {
        let positions = self.params.positions(id);
        self.insert_positions(&positions);
    }

    /// Sets precomputed positions. They must come from this filter's params.
    pub fn insert_positions(&mut self, positions: &[u64]) {
        for &g in positions {
            self.bits[(g / 8) as usize] |= 1 << (g % 8);
        }
        self.count += 1;
    }

    pub fn contains(&self, id: &ApId) -> bool {
        self.contains_positions(&self.params.positions(id))
    }

    pub fn contains_positions(&self, positions: &[u64]) -> bool {
        positions
            .iter()
            .all(|&g| self.bits[(g / 8) as usize] & (1 << (g % 8)) != 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ap(i: u32) -> ApId {
        let b = i.to_be_bytes();
        ApId::from_octets([0x02, 0x76, b[0], b[1], b[2], b[3]])
    }

    // Frozen from an independent implementation of the documented algorithm.
    #[test]
    fn golden_hash_vectors() {
        let id = ApId::parse("aa:bb:cc:00:00:01").unwrap();
        assert_eq!(seeded_hash(b"", 0), GOLDEN_EMPTY_SEED0);
        assert_eq!(seeded_hash(id.as_bytes(), DEFAULT_SEEDS[0]), GOLDEN_H1);
        assert_eq!(seeded_hash(id.as_bytes(), DEFAULT_SEEDS[1]), GOLDEN_H2);
        let params = BloomParams::new(1_000, 7, DEFAULT_SEEDS).unwrap();
        assert_eq!(params.positions(&id), GOLDEN_POSITIONS_M1000_K7.to_vec());
    }

    const GOLDEN_EMPTY_SEED0: u64 = 0xf52a_15e9_a9b5_e89b;
    const GOLDEN_H1: u64 = 0x507c_1e3a_b709_40b9;
    const GOLDEN_H2: u64 = 0x0681_7ec7_09bd_d854;
    const GOLDEN_POSITIONS_M1000_K7: [u64; 7] = [593, 141, 689, 237, 785, 333, 881];

    #[test]
    fn fp_rate_edges() {
        assert_eq!(fp_rate(1000, 0, 7), 0.0);
        assert_eq!(fp_rate(1, 1, 3), 1.0);
        assert_eq!(fp_rate(1, 50, 1), 1.0);
    }

    #[test]
    fn fp_rate_matches_direct_formula_at_small_m() {
        // Direct evaluation is exact enough at this scale.
        for &(m, n, k) in &[(64u64, 5u64, 3u32), (100, 10, 4), (1000, 100, 7)] {
            let direct = (1.0 - (1.0 - 1.0 / m as f64).powf((k as u64 * n) as f64)).powi(k as i32);
            assert!((fp_rate(m, n, k) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn large_filter_near_half_percent() {
        // 50-digit evaluation: 0.0051258986783759996...
        let p = fp_rate(1_100_000, 100_000, 7);
        assert!((p - 0.005_125_898_678_376).abs() < 1e-12, "{p}");
        assert!((p - 0.00513).abs() < 1e-4);
    }

    #[test]
    fn sizing_examples() {
        let p = size_for(100_000, 0.005).unwrap();
        // -n ln p / ln^2 2 = 1_102_775.34...
        assert_eq!(p.m(), 1_102_776);
        assert_eq!(p.k(), 8);
        assert!(fp_rate(p.m(), 100_000, p.k()) <= 1.1 * 0.005);

        let tiny = size_for(1, 0.5).unwrap();
        assert_eq!(tiny.m(), 8);
        assert!(tiny.k() >= 1);
        assert!(fp_rate(tiny.m(), 1, tiny.k()) <= 0.55);

        assert!(size_for(10, 0.0).is_err());
        assert!(size_for(10, 1.0).is_err());
        assert!(size_for(0, 0.1).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(BloomParams::new(7, 1, DEFAULT_SEEDS).is_err());
        assert!(BloomParams::new(8, 0, DEFAULT_SEEDS).is_err());
        assert!(BloomParams::new(8, 65, DEFAULT_SEEDS).is_err());
        assert_eq!(BloomParams::new(9, 1, DEFAULT_SEEDS).unwrap().byte_len(), 2);
    }

    #[test]
    fn insert_contains_basics() {
        let params = BloomParams::new(1024, 5, DEFAULT_SEEDS).unwrap();
        let mut bf = BloomFilter::new(params);
        assert!(!bf.contains(&ap(1)));
        bf.insert(&ap(1));
        assert!(bf.contains(&ap(1)));
        assert!(bf.popcount() <= 5);
        let bits = bf.bits().to_vec();
        bf.insert(&ap(1));
        assert_eq!(bf.bits(), &bits[..]);
        assert_eq!(bf.count(), 2);
    }

    #[test]
    fn from_parts_checks_length() {
        let params = BloomParams::new(16, 2, DEFAULT_SEEDS).unwrap();
        assert!(BloomFilter::from_parts(params, vec![0; 3], 0).is_err());
        assert!(BloomFilter::from_parts(params, vec![0; 2], 0).is_ok());
    }

    proptest! {
        #[test]
        fn fp_rate_monotone(m in 8u64..100_000, n in 0u64..5_000, k in 1u32..20, dn in 1u64..100, dm in 1u64..1000) {
            prop_assert!(fp_rate(m, n + dn, k) >= fp_rate(m, n, k));
            prop_assert!(fp_rate(m + dm, n, k) <= fp_rate(m, n, k));
        }

        #[test]
        fn sizing_meets_target(n in 1u64..200_000, p in 1e-6f64..0.5) {
            let params = size_for(n, p).unwrap();
            prop_assert!(fp_rate(params.m(), n, params.k()) <= 1.1 * p);
        }

        #[test]
        fn no_false_negatives(ids in prop::collection::btree_set(any::<u32>(), 1..200), m in 64u64..4096, k in 1u32..12) {
            let mut bf = BloomFilter::new(BloomParams::new(m, k, DEFAULT_SEEDS).unwrap());
            for &i in &ids {
                bf.insert(&ap(i));
            }
            prop_assert!(bf.popcount() <= k as u64 * ids.len() as u64);
            for &i in &ids {
                prop_assert!(bf.contains(&ap(i)));
            }
        }
    }
}
