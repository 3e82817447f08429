//! AdamW with per-parameter learning-rate groups and a cosine schedule.

use crate::diffcore::{Gradients, ParamSet};

/// `floor + (base − floor)·½(1 + cos(π·step/(total−1)))`; reaches `floor`
/// exactly at the last step. A single-step schedule sits at the floor.
pub fn cosine_lr(base: f64, floor: f64, step: usize, total: usize) -> f64 {
    let progress = if total <= 1 {
        1.0
    } else {
        step.min(total - 1) as f64 / (total - 1) as f64
    };
    floor + (base - floor) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay: `θ ← θ − lr·(m̂/(√v̂+ε) + wd·θ)`.
#[derive(Debug, Clone)]
pub struct AdamW {
    config: AdamWConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl AdamW {
    pub fn new(params: &ParamSet, config: AdamWConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.ids().map(|id| vec![0.0; params.get(id).len()]).collect();
        Self {
            config,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update; `lr[i]` is the rate of parameter `i`. Parameters without a
    /// gradient see a zero gradient (moments decay, weight decay applies).
    pub fn step(&mut self, params: &mut ParamSet, grads: &Gradients, lr: &[f64]) {
        self.t += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let ids: Vec<_> = params.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            let g = grads.get(id);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let theta = params.get_mut(id).data_mut();
            for k in 0..theta.len() {
                let gk = g.map_or(0.0, |g| g[k]);
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * gk;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * gk * gk;
                let update = (m[k] / bc1) / ((v[k] / bc2).sqrt() + c.eps);
                theta[k] -= lr[i] * (update + c.weight_decay * theta[k]);
            }
        }
    }
}
