//! SplitMix64 and the labelled stream derivation used by the benchmark
//! generator. Both are fixed so any implementation reproduces the same
//! instances from the same seed; see the README for the exact layout.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Stream for a path of labels below `seed`:
    /// `s = seed; for l in labels { s = mix64(s ^ mix64(l + GAMMA)) }`.
    pub fn derive(seed: u64, labels: &[u64]) -> Self {
        let state = labels.iter().fold(seed, |s, &l| mix64(s ^ mix64(l.wrapping_add(GOLDEN_GAMMA))));
        SplitMix64::new(state)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform integer in `[lo, hi]` as `lo + next % (hi - lo + 1)`.
    pub fn uniform(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo;
        if span == u64::MAX {
            return self.next_u64();
        }
        lo + self.next_u64() % (span + 1)
    }
}
