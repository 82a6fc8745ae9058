//! Portable deterministic RNG used for subsampling and synthetic weights.
//!
//! All randomness in the crate flows through this generator so that results
//! are bit-for-bit reproducible across runs and platforms. The stream is
//! xoshiro256** seeded from splitmix64; the exact constants are documented
//! in FORMATS.md so other implementations can replay selections.

/// splitmix64 step. Used to expand a single u64 seed into generator state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// xoshiro256** generator.
#[derive(Debug, Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    /// Seed the four state words from consecutive splitmix64 outputs.
    pub fn new(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        Self {
            s: [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()],
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Unbiased integer in [0, bound) via rejection sampling.
    ///
    /// Draws are rejected above the largest multiple of `bound`, so the
    /// result sequence depends only on the raw u64 stream.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % bound;
            }
        }
    }

    /// Uniform f64 in [0, 1) from the top 53 bits.
    pub fn uniform01(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform f64 in (0, 1]; safe as a log argument.
    pub fn uniform01_open_low(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller (one value per two uniforms).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = self.uniform01_open_low();
        let u2 = self.uniform01();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Partial Fisher-Yates: deterministically selects `n` of `len` indices.
///
/// Returns the first `n` entries of the shuffled index array, in shuffle
/// order. `n == len` returns the identity permutation (no shuffle applied).
pub fn subsample_indices(len: usize, n: usize, seed: u64) -> Vec<usize> {
    assert!(n <= len);
    let mut indices: Vec<usize> = (0..len).collect();
    if n == len {
        return indices;
    }
    let mut rng = Xoshiro256StarStar::new(seed);
    for i in 0..n {
        let j = i + rng.below((len - i) as u64) as usize;
        indices.swap(i, j);
    }
    indices.truncate(n);
    indices
}
