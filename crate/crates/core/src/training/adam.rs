//! Adam optimizer and the plateau learning-rate schedule.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. The learning rate is passed per step so a
/// scheduler can drive it.
#[derive(Clone, Debug)]
pub struct Adam {
    cfg: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig, n_params: usize) -> Self {
        Self {
            cfg,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let b1 = self.cfg.beta1;
        let b2 = self.cfg.beta2;
        let bias1 = 1.0 - b1.powi(self.t as i32);
        let bias2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grads[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bias1;
            let v_hat = self.v[i] / bias2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.cfg.eps);
        }
    }
}

/// Halve the learning rate after `patience` consecutive epochs without a
/// strict validation improvement; the stall counter resets after each halving.
#[derive(Clone, Debug)]
pub struct PlateauSchedule {
    patience: usize,
    factor: f64,
    lr: f64,
    best: f64,
    stalled: usize,
}

impl PlateauSchedule {
    pub fn new(initial_lr: f64, patience: usize, factor: f64) -> Self {
        Self {
            patience,
            factor,
            lr: initial_lr,
            best: f64::INFINITY,
            stalled: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Feed one epoch's validation loss; returns the learning rate to use
    /// for the next epoch.
    pub fn observe(&mut self, val_loss: f64) -> f64 {
        if val_loss < self.best {
            self.best = val_loss;
            self.stalled = 0;
        } else {
            self.stalled += 1;
            if self.stalled >= self.patience {
                self.lr *= self.factor;
                self.stalled = 0;
            }
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_descends_a_quadratic() {
        let mut params = vec![5.0, -3.0];
        let mut adam = Adam::new(AdamConfig::default(), 2);
        for _ in 0..2000 {
            let grads: Vec<f64> = params.iter().map(|p| 2.0 * p).collect();
            adam.step(&mut params, &grads, 0.05);
        }
        assert!(params.iter().all(|p| p.abs() < 1e-3), "{params:?}");
    }

    #[test]
    fn plateau_halves_after_exactly_twenty_stalls() {
        let mut sched = PlateauSchedule::new(1e-3, 20, 0.5);
        assert_eq!(sched.observe(1.0), 1e-3); // first value is an improvement
        for i in 0..19 {
            assert_eq!(sched.observe(1.0), 1e-3, "stall {i}");
        }
        // 20th consecutive stall halves.
        assert_eq!(sched.observe(1.0), 5e-4);
    }

    #[test]
    fn improvement_resets_the_stall_counter() {
        let mut sched = PlateauSchedule::new(1e-3, 20, 0.5);
        sched.observe(1.0);
        for _ in 0..19 {
            sched.observe(1.0);
        }
        assert_eq!(sched.observe(0.9), 1e-3); // improvement just in time
        for _ in 0..19 {
            assert_eq!(sched.observe(0.9), 1e-3);
        }
        assert_eq!(sched.observe(0.9), 5e-4);
    }

    #[test]
    fn halving_repeats_after_another_stall_run() {
        let mut sched = PlateauSchedule::new(1e-3, 20, 0.5);
        sched.observe(1.0);
        for _ in 0..20 {
            sched.observe(1.0);
        }
        assert_eq!(sched.lr(), 5e-4);
        for _ in 0..19 {
            assert_eq!(sched.observe(1.0), 5e-4);
        }
        assert_eq!(sched.observe(1.0), 2.5e-4);
    }
}
