//! Seeded test-tensor generation on SplitMix64.

use blockdialect::Matrix;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal, StudentT};
use rand_xoshiro::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Gaussian,
    StudentT(f64),
    Uniform,
}

pub fn generator(seed: u64) -> SplitMix64 {
    SplitMix64::seed_from_u64(seed)
}

pub fn sample_vec(rng: &mut SplitMix64, dist: Dist, n: usize) -> Vec<f64> {
    match dist {
        Dist::Gaussian => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        Dist::StudentT(nu) => {
            let t = StudentT::new(nu).expect("positive degrees of freedom");
            (0..n).map(|_| t.sample(rng)).collect()
        }
        Dist::Uniform => (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

pub fn random_matrix(seed: u64, rows: usize, cols: usize, dist: Dist) -> Matrix<f64> {
    let mut rng = generator(seed);
    Matrix::new(rows, cols, sample_vec(&mut rng, dist, rows * cols)).expect("sized")
}
