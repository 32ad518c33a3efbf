//! Seeded point generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Independent named streams derived from one user seed.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const TRAIN_CLOUD: u64 = 2;
    pub const VALIDATION_CLOUD: u64 = 3;
    pub const AUX_JITTER: u64 = 4;
}

/// ChaCha8 generator for `(seed, stream)`.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `n` points uniform in the box `bounds` (half-open per axis), row-major.
pub fn uniform_box(rng: &mut impl Rng, n: usize, bounds: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * bounds.len());
    for _ in 0..n {
        for &(lo, hi) in bounds {
            out.push(lo + (hi - lo) * rng.gen::<f64>());
        }
    }
    out
}

/// First `n` points of an Owen-scrambled Sobol sequence in `[0,1)^dim`, scaled into `bounds`.
pub fn sobol_box(n: usize, bounds: &[(f64, f64)], seed: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * bounds.len());
    for i in 0..n as u32 {
        for (d, &(lo, hi)) in bounds.iter().enumerate() {
            let u = sobol_burley::sample(i, d as u32, seed) as f64;
            out.push(lo + (hi - lo) * u);
        }
    }
    out
}
