//! Counter-keyed random numbers: the value at index `k` is a pure function
//! of `(seed, lane, k)`, so a medium can be queried out of order and from
//! any number of threads without storing the sequence.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in (0, 1] on the 2^-53 grid. Never returns 0.
pub(crate) fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [0, 1) on the 2^-53 grid.
pub(crate) fn half_open_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct CounterStream {
    key: u64,
}

impl CounterStream {
    pub(crate) fn new(seed: u64, lane: u64) -> Self {
        let key = mix64(seed ^ mix64(lane.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)));
        Self { key }
    }

    pub(crate) fn bits(&self, k: i64) -> u64 {
        mix64(self.key.wrapping_add((k as u64).wrapping_mul(GOLDEN_GAMMA)))
    }

    pub(crate) fn open_unit(&self, k: i64) -> f64 {
        open_unit(self.bits(k))
    }
}
