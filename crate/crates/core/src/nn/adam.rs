//! Adam optimizer over flat parameter slices.

use super::network::ParamMut;
use super::Scalar;

pub struct Adam<F> {
    beta1: F,
    beta2: F,
    eps: F,
    step: u32,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new() -> Adam<F> {
        Adam {
            beta1: F::from_f64_(0.9),
            beta2: F::from_f64_(0.999),
            eps: F::from_f64_(1e-8),
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update with the given learning rate. Moment buffers are
    /// allocated lazily on the first call.
    pub fn step(&mut self, params: &mut [ParamMut<'_, F>], lr: F) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![F::zero(); p.value.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = F::one() - self.beta1.powi(t);
        let bc2 = F::one() - self.beta2.powi(t);
        let one = F::one();
        for (p, (m, v)) in params.iter_mut().zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.value.len() {
                let g = p.grad[i];
                m[i] = self.beta1 * m[i] + (one - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (one - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p.value[i] = p.value[i] - lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

impl<F: Scalar> Default for Adam<F> {
    fn default() -> Self {
        Self::new()
    }
}
