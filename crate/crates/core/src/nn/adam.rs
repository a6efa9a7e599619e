use alloc::vec::Vec;

use crate::matrix::Matrix;
use crate::nn::params::{Gradients, Group, ParamStore};

/// One learning rate per parameter group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub shared: f64,
    pub pbd: f64,
    pub stae: f64,
    pub emotion: f64,
}

impl LearningRates {
    pub fn uniform(lr: f64) -> Self {
        LearningRates { shared: lr, pbd: lr, stae: lr, emotion: lr }
    }

    pub fn get(&self, group: Group) -> f64 {
        match group {
            Group::Shared => self.shared,
            Group::Pbd => self.pbd,
            Group::Stae => self.stae,
            Group::Emotion => self.emotion,
        }
    }

    pub fn set(&mut self, group: Group, lr: f64) {
        match group {
            Group::Shared => self.shared = lr,
            Group::Pbd => self.pbd = lr,
            Group::Stae => self.stae = lr,
            Group::Emotion => self.emotion = lr,
        }
    }
}

/// Adam with independent learning rates and step counters per group.
///
/// Parameters without a gradient in a step are skipped entirely, moments
/// included.
#[derive(Debug, Clone)]
pub struct Adam {
    pub rates: LearningRates,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    steps: [u64; 4],
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(store: &ParamStore, rates: LearningRates) -> Self {
        let zeros = || store.iter().map(|(_, e)| Matrix::zeros(e.value.rows(), e.value.cols())).collect();
        Adam { rates, beta1: 0.9, beta2: 0.999, eps: 1e-8, steps: [0; 4], m: zeros(), v: zeros() }
    }

    pub fn steps(&self, group: Group) -> u64 {
        self.steps[group.index()]
    }

    /// Applies one update to every parameter that has a gradient.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        let mut touched = [false; 4];
        for id in store.ids() {
            if grads.get(id).is_some() {
                touched[store.entry(id).group.index()] = true;
            }
        }
        for (g, t) in touched.iter().enumerate() {
            if *t {
                self.steps[g] += 1;
            }
        }

        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let Some(grad) = grads.get(id) else { continue };
            let group = store.entry(id).group;
            let lr = self.rates.get(group);
            let t = self.steps[group.index()] as f64;
            let bc1 = 1.0 - libm::pow(self.beta1, t);
            let bc2 = 1.0 - libm::pow(self.beta2, t);
            let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
            let m = self.m[id.index()].as_mut_slice();
            let v = self.v[id.index()].as_mut_slice();
            let p = store.get_mut(id).as_mut_slice();
            for (((pi, mi), vi), &gi) in p.iter_mut().zip(m).zip(v).zip(grad.as_slice()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= lr * m_hat / (libm::sqrt(v_hat) + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(lr: LearningRates) -> (ParamStore, Adam) {
        let mut store = ParamStore::new();
        store.add("a", Group::Shared, Matrix::from_rows(&[[1.0, -2.0]]));
        store.add("b", Group::Stae, Matrix::from_rows(&[[0.5]]));
        let adam = Adam::new(&store, lr);
        (store, adam)
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut store, mut adam) = setup(LearningRates::uniform(0.1));
        let before = store.clone();
        let mut g = Gradients::for_store(&store);
        for id in store.ids() {
            let (r, c) = store.get(id).shape();
            g.accumulate(id, 1.0, &Matrix::zeros(r, c));
        }
        adam.step(&mut store, &g);
        assert_eq!(store, before);
    }

    #[test]
    fn zero_rate_is_identity() {
        let (mut store, mut adam) = setup(LearningRates::uniform(0.0));
        let before = store.clone();
        let mut g = Gradients::for_store(&store);
        for id in store.ids() {
            let (r, c) = store.get(id).shape();
            g.accumulate(id, 1.0, &Matrix::filled(r, c, 3.7));
        }
        for _ in 0..5 {
            adam.step(&mut store, &g);
        }
        assert_eq!(store, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m̂ = g, v̂ = g², so the update is lr·g/(|g| + ε)
        let lr = 1e-3;
        let (mut store, mut adam) = setup(LearningRates::uniform(lr));
        let before = store.clone();
        let mut g = Gradients::for_store(&store);
        for id in store.ids() {
            let (r, c) = store.get(id).shape();
            g.accumulate(id, 1.0, &Matrix::filled(r, c, 0.25));
        }
        adam.step(&mut store, &g);
        let expected = lr * 0.25 / (0.25 + 1e-8);
        for id in store.ids() {
            for (a, b) in store.get(id).as_slice().iter().zip(before.get(id).as_slice()) {
                assert!(((b - a) - expected).abs() < 1e-15);
            }
        }
        assert_eq!(adam.steps(Group::Shared), 1);
        assert_eq!(adam.steps(Group::Pbd), 0);
    }
}
