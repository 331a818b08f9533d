//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Optimizer state for a fixed list of parameter tensors.
///
/// Each call to [`AdamW::step`] must pass the tensors in the same order and
/// with the same lengths as the first call.
#[derive(Debug, Clone)]
pub struct AdamW {
    config: AdamWConfig,
    t: i32,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(config: AdamWConfig) -> Self {
        Self {
            config,
            t: 0,
            moments: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    pub fn step(&mut self, tensors: &mut [(&mut [f64], &[f64])]) {
        if self.moments.is_empty() {
            self.moments = tensors
                .iter()
                .map(|(p, _)| (vec![0.0; p.len()], vec![0.0; p.len()]))
                .collect();
        }
        assert_eq!(self.moments.len(), tensors.len(), "parameter list changed");
        self.t += 1;
        let AdamWConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let bias1 = 1.0 - beta1.powi(self.t);
        let bias2 = 1.0 - beta2.powi(self.t);
        for ((params, grads), (m, v)) in tensors.iter_mut().zip(self.moments.iter_mut()) {
            assert_eq!(params.len(), grads.len());
            assert_eq!(params.len(), m.len(), "parameter shape changed");
            for i in 0..params.len() {
                let g = grads[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                params[i] -= lr * weight_decay * params[i];
                params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    /// Zeroes the moment estimates of one entry range of tensor `slot`,
    /// used when a codebook row is re-seeded.
    pub fn reset(&mut self, slot: usize, range: std::ops::Range<usize>) {
        if let Some((m, v)) = self.moments.get_mut(slot) {
            m[range.clone()].iter_mut().for_each(|x| *x = 0.0);
            v[range].iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut opt = AdamW::new(AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        });
        let mut p = vec![1.0, -1.0];
        opt.step(&mut [(&mut p, &[0.5, -2.0])]);
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((p[1] - (-1.0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn decay_is_decoupled_from_gradient() {
        let mut opt = AdamW::new(AdamWConfig {
            lr: 0.1,
            weight_decay: 0.5,
            ..Default::default()
        });
        let mut p = vec![2.0];
        opt.step(&mut [(&mut p, &[0.0])]);
        // zero gradient: only the decay term acts
        assert!((p[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-12);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut opt = AdamW::new(AdamWConfig {
            lr: 0.05,
            weight_decay: 0.0,
            ..Default::default()
        });
        let mut p = vec![3.0, -4.0];
        for _ in 0..2000 {
            let g: Vec<f64> = p.iter().map(|x| 2.0 * x).collect();
            opt.step(&mut [(&mut p, &g)]);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-3));
    }
}
