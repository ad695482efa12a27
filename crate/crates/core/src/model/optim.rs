//! Adam optimizer over a flat parameter set.

use super::params::ParamSet;
use crate::tensor::Tensor;

pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: usize,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        let zeros = |p: &ParamSet| {
            (0..p.len())
                .map(|i| Tensor::zeros(p.tensor(i).rows(), p.tensor(i).cols()))
                .collect()
        };
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros(params),
            v: zeros(params),
        }
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) {
        self.step += 1;
        let t = self.step as f64;
        let bias1 = 1.0 - self.beta1.powf(t);
        let bias2 = 1.0 - self.beta2.powf(t);
        for (idx, grad) in grads.iter().enumerate() {
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            let theta = params.tensor_mut(idx);
            for ((m_i, v_i), (g_i, t_i)) in m
                .data_mut()
                .iter_mut()
                .zip(v.data_mut())
                .zip(grad.data().iter().zip(theta.data_mut()))
            {
                *m_i = self.beta1 * *m_i + (1.0 - self.beta1) * g_i;
                *v_i = self.beta2 * *v_i + (1.0 - self.beta2) * g_i * g_i;
                let m_hat = *m_i / bias1;
                let v_hat = *v_i / bias2;
                *t_i -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
