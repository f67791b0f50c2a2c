//! Seed splitting.
//!
//! Every random stream is derived from one root seed: the ChaCha8 generator is
//! seeded with the root seed and its stream id is the FNV-1a hash of a label
//! mixed with an index. Streams are independent of thread scheduling.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::field::ComplexField;
use crate::grid::Grid;

pub fn fnv1a(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng
}

/// Samples with independent uniform real and imaginary parts in `[-1, 1)`.
pub fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> ComplexField {
    let samples = (0..grid.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ComplexField::from_samples(grid, samples).expect("finite samples")
}
