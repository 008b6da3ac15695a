//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator seeded with
//! `seed_from_u64(seed)` and positioned on a stream id that encodes the
//! purpose of the draw plus an optional sub-index (epoch, sample, ...). Two
//! purposes never share a stream, so adding draws to one never shifts
//! another. Gaussians use the Box–Muller transform of two uniforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Stream {
    ProbRows = 1,
    Values = 2,
    Costs = 3,
    Contracts = 4,
    Init = 5,
    Shuffle = 6,
    Directions = 7,
    BoundarySamples = 8,
    Probes = 9,
}

/// Generator for `purpose`, sub-stream `index`.
pub fn stream(seed: u64, purpose: Stream, index: u32) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 32) | u64::from(index));
    rng
}

/// Uniform on `[lo, hi)`.
#[inline]
pub fn uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

/// Standard normal via Box–Muller (cosine branch only).
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    // 1 - U keeps the log argument in (0, 1]
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniformly distributed unit vector in `R^dim`.
pub fn unit_vector(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let norm = crate::linalg::norm2(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
