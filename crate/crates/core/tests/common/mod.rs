#![allow(dead_code)]

use gzsl_core::autodiff::{Tape, Var};
use gzsl_core::nn::params::{ParamId, ParamStore};
use gzsl_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-scale, scale)`.
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..classes)).collect()
}

/// Random symmetric positive definite matrix with eigenvalues at least `floor`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Matrix {
    let g = random_matrix(rng, n, n, 1.0);
    let mut a = g.matmul_nt(&g);
    for i in 0..n {
        a.set(i, i, a.get(i, i) + floor);
    }
    a
}

/// Laplacian of a random symmetric non-negative weight matrix.
pub fn random_laplacian(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Matrix {
    let mut w = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let v = rng.random_range(0.0..1.0);
                w.set(i, j, v);
                w.set(j, i, v);
            }
        }
    }
    let mut l = w.scale(-1.0);
    for i in 0..n {
        let d: f64 = w.row(i).iter().sum();
        l.set(i, i, d);
    }
    l
}

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// `|a − n| / max(|a|, |n|, 1e-2)`; the floor keeps near-zero gradients
/// from being judged on round-off alone.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-2)
}

/// Worst relative error between reverse-mode gradients and central
/// differences over every entry of `params`.
pub fn gradient_check(
    store: &mut ParamStore,
    params: &[ParamId],
    loss: impl Fn(&mut Tape<'_>) -> Var,
) -> f64 {
    let grads = {
        let mut tape = Tape::new(store);
        let l = loss(&mut tape);
        tape.backward(l).expect("scalar loss")
    };
    let eval = |store: &ParamStore| {
        let mut tape = Tape::new(store);
        let l = loss(&mut tape);
        tape.value(l).item()
    };
    let mut worst: f64 = 0.0;
    for &id in params {
        let n = store.get(id).len();
        for k in 0..n {
            let orig = store.get(id).as_slice()[k];
            store.get_mut(id).as_mut_slice()[k] = orig + FD_STEP;
            let up = eval(store);
            store.get_mut(id).as_mut_slice()[k] = orig - FD_STEP;
            let down = eval(store);
            store.get_mut(id).as_mut_slice()[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let analytic = grads.get(id).map_or(0.0, |g| g.as_slice()[k]);
            worst = worst.max(relative_error(analytic, numeric));
        }
    }
    worst
}

/// `Σ r ⊙ v` with a fixed random `r`, so every output entry matters.
pub fn weighted_sum(tape: &mut Tape<'_>, v: Var, r: &Matrix) -> Var {
    let rv = tape.constant(r.clone());
    let prod = tape.mul(v, rv);
    tape.sum(prod)
}
pub mod checks;
