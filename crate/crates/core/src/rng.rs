//! Counter-based splittable random number generation.
//!
//! Streams are identified by a key built from `(seed, setting, replicate,
//! stage, ...)` components; drawing from one stream never touches another,
//! so replicates and pipeline stages regenerate independently and parallel
//! callers stay deterministic without sequence coupling.

#[allow(unused_imports)]
use num_traits::Float;

/// Stage tags used to derive per-purpose substreams.
pub mod stage {
    pub const LOWRANK: u64 = 0x01;
    pub const SPARSE: u64 = 0x02;
    pub const NOISE: u64 = 0x03;
    pub const MASK: u64 = 0x04;
    pub const SPLIT: u64 = 0x05;
    pub const BOOTSTRAP: u64 = 0x06;
    pub const MODEL_FIT: u64 = 0x07;
    pub const TEST_POINTS: u64 = 0x08;
    pub const FULL_CP: u64 = 0x09;
    pub const NOISE_PERMUTE: u64 = 0x0a;
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Stafford mix 13 finalizer (the SplitMix64 output function).
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// An immutable stream key; `child` derives independent substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(mix(seed ^ GOLDEN))
    }

    /// Derives a substream keyed by `tag`; different tags give
    /// statistically independent streams.
    pub fn child(self, tag: u64) -> Self {
        StreamKey(mix(self.0.wrapping_add(GOLDEN) ^ mix(tag ^ 0x5851_f42d_4c95_7f2d)))
    }

    pub fn rng(self) -> CounterRng {
        CounterRng {
            key: self.0,
            counter: 0,
            spare_normal: None,
        }
    }
}

/// Counter-based generator: output `k` is a hash of `(key, k)`.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    counter: u64,
    spare_normal: Option<f64>,
}

impl CounterRng {
    pub fn from_key(key: StreamKey) -> Self {
        key.rng()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = mix(self.key ^ self.counter.wrapping_mul(GOLDEN));
        self.counter = self.counter.wrapping_add(1);
        out
    }

    /// Uniform in `[0, 1)` with 53-bit resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in `(0, 1]`, safe for logarithms.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// A uniformly random index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Rejection sampling for unbiased draws.
        let n64 = n as u64;
        let zone = u64::MAX - (u64::MAX % n64);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n64) as usize;
            }
        }
    }

    /// Standard normal via Box-Muller (caches the paired draw).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Student t with 3 degrees of freedom: N / sqrt(chi²₃ / 3).
    pub fn student_t3(&mut self) -> f64 {
        let z = self.normal();
        let chi2 = {
            let a = self.normal();
            let b = self.normal();
            let c = self.normal();
            a * a + b * b + c * c
        };
        z / (chi2 / 3.0).sqrt()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }
}
