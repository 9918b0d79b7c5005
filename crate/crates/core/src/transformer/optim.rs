//! AdamW with decoupled weight decay and a linear warmup/decay schedule.

use super::config::{OptimizerConfig, TransformerConfig};
use super::params::{tensor_specs, Params};
use crate::scalar::Scalar;

/// Learning-rate multiplier: linear ramp over the warmup steps, then linear
/// decay towards zero at `total_steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSchedule {
    pub warmup_steps: usize,
    pub total_steps: usize,
}

impl LinearSchedule {
    pub fn new(total_steps: usize, warmup_fraction: f64) -> Self {
        Self {
            warmup_steps: (warmup_fraction * total_steps as f64).floor() as usize,
            total_steps,
        }
    }

    pub fn factor(&self, step: usize) -> f64 {
        if step < self.warmup_steps {
            (step + 1) as f64 / self.warmup_steps as f64
        } else {
            let remaining = self.total_steps.saturating_sub(step) as f64;
            let span = (self.total_steps - self.warmup_steps).max(1) as f64;
            (remaining / span).max(0.0)
        }
    }
}

pub struct AdamW<T> {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    decay_mask: Vec<bool>,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    step: i32,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(model: &TransformerConfig, opt: &OptimizerConfig) -> Self {
        let specs = tensor_specs(model);
        let zeros = Params::<T>::zeros(model);
        let state: Vec<Vec<T>> = zeros.slots().into_iter().cloned().collect();
        Self {
            beta1: opt.beta1,
            beta2: opt.beta2,
            eps: opt.eps,
            weight_decay: opt.weight_decay,
            decay_mask: specs.iter().map(|s| s.decay).collect(),
            first: state.clone(),
            second: state,
            step: 0,
        }
    }

    /// One update with learning rate `lr` using gradients `grads`.
    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>, lr: f64) {
        self.step += 1;
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let one = T::one();
        let c1 = T::from_f64(1.0 - self.beta1.powi(self.step));
        let c2 = T::from_f64(1.0 - self.beta2.powi(self.step));
        let eps = T::from_f64(self.eps);
        let lr_t = T::from_f64(lr);
        let decay = T::from_f64(lr * self.weight_decay);
        let slots = params.slots_mut().into_iter().zip(grads.slots());
        for (idx, (p, g)) in slots.enumerate() {
            let m = &mut self.first[idx];
            let v = &mut self.second[idx];
            let decays = self.decay_mask[idx];
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (one - b1) * gi;
                v[i] = b2 * v[i] + (one - b2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                if decays {
                    let shrink = decay * p[i];
                    p[i] -= shrink;
                }
                p[i] -= lr_t * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
