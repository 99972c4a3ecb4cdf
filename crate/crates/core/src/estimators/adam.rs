//! Adam on flat parameter vectors with a cosine step-size schedule.

use crate::netgen::{NetGrad, SparseReluNet};

pub(crate) struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Adam {
    pub fn new(len: usize) -> Self {
        Adam {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    /// Bias-corrected direction `m̂ / (√v̂ + ε)` for a descent step.
    pub fn direction(&mut self, grad: &[f64]) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        grad.iter()
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
            .map(|(g, (m, v))| {
                *m = BETA1 * *m + (1.0 - BETA1) * g;
                *v = BETA2 * *v + (1.0 - BETA2) * g * g;
                (*m / c1) / ((*v / c2).sqrt() + EPS)
            })
            .collect()
    }
}

/// Step size at `step` of `total`: cosine decay from `base` to `base / 20`.
pub(crate) fn schedule(base: f64, step: usize, total: usize) -> f64 {
    if total <= 1 {
        return base;
    }
    let frac = step as f64 / (total - 1) as f64;
    let floor = base / 20.0;
    floor + 0.5 * (base - floor) * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// Descends `net` along an Adam direction computed from `grad`, then projects.
pub(crate) fn descend(net: &mut SparseReluNet, adam: &mut Adam, grad: &NetGrad, lr: f64) {
    let dir = adam.direction(&grad.flat());
    let mut update = NetGrad::zeros_like(net);
    update.assign_flat(&dir);
    net.apply_update(&update, -lr);
    net.project_in_place();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        let mut x = vec![3.0, -2.0];
        let mut adam = Adam::new(2);
        for t in 0..2000 {
            let g: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
            let d = adam.direction(&g);
            let lr = schedule(0.05, t, 2000);
            for (a, b) in x.iter_mut().zip(d) {
                *a -= lr * b;
            }
        }
        assert!(x.iter().all(|v| v.abs() < 1e-3), "{x:?}");
    }

    #[test]
    fn schedule_endpoints() {
        assert_eq!(schedule(1.0, 0, 11), 1.0);
        assert!((schedule(1.0, 10, 11) - 0.05).abs() < 1e-15);
    }
}
