use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::matrix::Matrix;

/// Seeded source of initial parameter values.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Entries drawn from `U(−1/√fan_in, 1/√fan_in)`.
    pub fn fan_in_uniform(&mut self, rows: usize, cols: usize, fan_in: usize) -> Matrix {
        let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
        self.uniform(rows, cols, bound)
    }

    pub fn uniform(&mut self, rows: usize, cols: usize, bound: f64) -> Matrix {
        if bound == 0.0 {
            return Matrix::zeros(rows, cols);
        }
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        Matrix::from_fn(rows, cols, |_, _| dist.sample(&mut self.rng))
    }

    pub fn gaussian(&mut self, rows: usize, cols: usize, sigma: f64) -> Matrix {
        let dist = Normal::new(0.0, sigma).expect("valid sigma");
        Matrix::from_fn(rows, cols, |_, _| dist.sample(&mut self.rng))
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn next_seed(&mut self) -> u64 {
        self.rng.random()
    }
}
