#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal, StudentT};
use rand_xoshiro::SplitMix64;

pub fn rng(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

pub fn gaussian_block(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn student_t_block(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    let t = StudentT::new(3.0).unwrap();
    (0..len).map(|_| t.sample(rng)).collect()
}

/// Nearest element of `table` to `x` by exhaustive scan; `tie` picks among
/// equidistant candidates (given as indices).
pub fn nearest_index(table: &[f64], x: f64, tie: impl Fn(usize, usize) -> usize) -> usize {
    let mut best = 0;
    for i in 1..table.len() {
        let (d, db) = ((table[i] - x).abs(), (table[best] - x).abs());
        if d < db {
            best = i;
        } else if d == db {
            best = tie(best, i);
        }
    }
    best
}
