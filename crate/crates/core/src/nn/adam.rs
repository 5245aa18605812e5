use alloc::vec::Vec;

use crate::fmath;

use super::tensor::{Parameter, Tensor};

/// Adam with bias correction over a fixed parameter list.
pub struct Adam {
    params: Vec<Parameter>,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(params: Vec<Parameter>, lr: f64) -> Adam {
        Adam::with_betas(params, lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(params: Vec<Parameter>, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Adam {
        let m = params.iter().map(|p| { let t = p.value(); Tensor::zeros(t.rows, t.cols) }).collect();
        let v = params.iter().map(|p| { let t = p.value(); Tensor::zeros(t.rows, t.cols) }).collect();
        Adam { params, lr, beta1, beta2, eps, step: 0, m, v }
    }

    pub fn zero_grads(&self) {
        for p in &self.params {
            p.zero_grad();
        }
    }

    pub fn step(&mut self) {
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - fmath::powi(self.beta1, t);
        let bc2 = 1.0 - fmath::powi(self.beta2, t);
        for (i, p) in self.params.iter().enumerate() {
            let g = p.grad();
            let mut val = p.value();
            for k in 0..g.len() {
                let gk = g.data[k];
                self.m[i].data[k] = self.beta1 * self.m[i].data[k] + (1.0 - self.beta1) * gk;
                self.v[i].data[k] = self.beta2 * self.v[i].data[k] + (1.0 - self.beta2) * gk * gk;
                let mhat = self.m[i].data[k] / bc1;
                let vhat = self.v[i].data[k] / bc2;
                val.data[k] -= self.lr * mhat / (fmath::sqrt(vhat) + self.eps);
            }
            p.set_value(val);
        }
    }
}
