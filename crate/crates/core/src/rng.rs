//! Seedable PCG32 generator (pcg_setseq_64_xsh_rr_32).
//!
//! Every random decision in the toolkit flows through this generator so that
//! datasets, weight initializations, and shuffles are bit-reproducible across
//! platforms. The algorithm name recorded in dataset manifests refers to this
//! implementation.
//!
//! Distinct concerns draw from distinct streams (see [`streams`]): the stream
//! selector is PCG's sequence constant, so e.g. dataset sampling and the
//! normalization probe never share state.

/// Stream selectors. Keeping them centralized prevents accidental reuse.
pub mod streams {
    /// Dataset stimulus sampling.
    pub const SAMPLES: u64 = 1;
    /// Stimuli used to probe the normalization constant.
    pub const PROBE: u64 = 2;
    /// Weight initialization, one stream per model kind.
    pub const INIT_APPROX: u64 = 10;
    pub const INIT_ENCODER: u64 = 11;
    pub const INIT_INVERSE: u64 = 12;
    /// Per-epoch shuffles use SHUFFLE_BASE + epoch index.
    pub const SHUFFLE_BASE: u64 = 1000;
    /// Synthetic digit-corpus rendering (train / held-out sets).
    pub const GLYPHS_TRAIN: u64 = 20;
    pub const GLYPHS_TEST: u64 = 21;
}

const MULTIPLIER: u64 = 6_364_136_223_846_793_005;

#[derive(Clone, Debug)]
pub struct Pcg32 {
    state: u64,
    inc: u64,
}

impl Pcg32 {
    /// Seed with an initial state and a stream selector, following the
    /// reference `pcg32_srandom_r` initialization.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = Pcg32 { state: 0, inc: (stream << 1) | 1 };
        rng.next_u32();
        rng.state = rng.state.wrapping_add(seed);
        rng.next_u32();
        rng
    }

    pub fn next_u32(&mut self) -> u32 {
        let old = self.state;
        self.state = old.wrapping_mul(MULTIPLIER).wrapping_add(self.inc);
        let xorshifted = (((old >> 18) ^ old) >> 27) as u32;
        let rot = (old >> 59) as u32;
        xorshifted.rotate_right(rot)
    }

    /// Two 32-bit draws; the first fills the low word.
    pub fn next_u64(&mut self) -> u64 {
        let lo = self.next_u32() as u64;
        let hi = self.next_u32() as u64;
        (hi << 32) | lo
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, bound), unbiased via threshold rejection.
    pub fn below(&mut self, bound: u32) -> u32 {
        assert!(bound > 0, "below(0) is undefined");
        let threshold = bound.wrapping_neg() % bound;
        loop {
            let r = self.next_u32();
            if r >= threshold {
                return r % bound;
            }
        }
    }

    /// Uniform integer in [lo, hi] inclusive.
    pub fn range_inclusive(&mut self, lo: u32, hi: u32) -> u32 {
        assert!(lo <= hi);
        lo + self.below(hi - lo + 1)
    }

    /// In-place Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, data: &mut [T]) {
        for i in (1..data.len()).rev() {
            let j = self.below(i as u32 + 1) as usize;
            data.swap(i, j);
        }
    }

    /// `k` distinct indices drawn uniformly from 0..n (partial Fisher–Yates).
    pub fn choose_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below((n - i) as u32) as usize;
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_pcg32_output() {
        // First outputs of the canonical pcg32 demo: seed 42, sequence 54.
        let mut rng = Pcg32::new(42, 54);
        let expect: [u32; 6] =
            [0xa15c_02b7, 0x7b47_f409, 0xba1d_3330, 0x83d2_f293, 0xbfa4_784b, 0xcbed_606e];
        for e in expect {
            assert_eq!(rng.next_u32(), e);
        }
    }

    #[test]
    fn streams_are_independent() {
        let mut a = Pcg32::new(7, streams::SAMPLES);
        let mut b = Pcg32::new(7, streams::PROBE);
        let xs: Vec<u32> = (0..8).map(|_| a.next_u32()).collect();
        let ys: Vec<u32> = (0..8).map(|_| b.next_u32()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn f64_draws_are_in_unit_interval() {
        let mut rng = Pcg32::new(1, 1);
        for _ in 0..1000 {
            let v = rng.next_f64();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn below_is_in_range_and_reaches_all_values() {
        let mut rng = Pcg32::new(3, 9);
        let mut seen = [false; 7];
        for _ in 0..500 {
            let v = rng.below(7);
            assert!(v < 7);
            seen[v as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn choose_distinct_has_no_duplicates() {
        let mut rng = Pcg32::new(11, 2);
        for _ in 0..50 {
            let mut picks = rng.choose_distinct(60, 30);
            picks.sort_unstable();
            picks.dedup();
            assert_eq!(picks.len(), 30);
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let mut a = Pcg32::new(99, 5);
        let mut b = Pcg32::new(99, 5);
        for _ in 0..32 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
