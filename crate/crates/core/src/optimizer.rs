//! Adam with bias correction, and staircase exponential learning-rate decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_beta1() -> f64 {
    BETA1
}
fn default_beta2() -> f64 {
    BETA2
}
fn default_eps() -> f64 {
    EPSILON
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: BETA1,
            beta2: BETA2,
            eps: EPSILON,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn reset(&mut self) {
        self.m.fill(0.0);
        self.v.fill(0.0);
        self.t = 0;
    }

    /// One bias-corrected Adam update of `params` in place:
    ///
    /// ```text
    /// m ← β1 m + (1-β1) g,   v ← β2 v + (1-β2) g²
    /// θ ← θ - lr · m̂ / (sqrt(v̂) + ε),   m̂ = m/(1-β1^t), v̂ = v/(1-β2^t)
    /// ```
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::ShapeMismatch(format!(
                "adam state has {} entries, params {}, gradient {}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some((i, g)) = grad.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::Numeric {
                op: format!("adam_step gradient[{i}]"),
                value: *g,
            });
        }
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// `lr(epoch) = base_lr · decay_factor^floor(epoch / decay_every)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub base_lr: f64,
    #[serde(default = "unit")]
    pub decay_factor: f64,
    #[serde(default = "thousand")]
    pub decay_every: usize,
}

fn unit() -> f64 {
    1.0
}
fn thousand() -> usize {
    1000
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        Self {
            base_lr: lr,
            decay_factor: 1.0,
            decay_every: 1000,
        }
    }

    pub fn staircase(base_lr: f64, decay_factor: f64, decay_every: usize) -> Self {
        Self {
            base_lr,
            decay_factor,
            decay_every,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::config(format!(
                "decay_factor must lie in (0, 1], got {}",
                self.decay_factor
            )));
        }
        if self.decay_every == 0 {
            return Err(Error::config("decay_every must be >= 1"));
        }
        Ok(())
    }

    /// Learning rate at a phase-local epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let stairs = (epoch / self.decay_every) as i32;
        self.base_lr * self.decay_factor.powi(stairs)
    }
}

pub fn lr_at(schedule: &LrSchedule, epoch: usize) -> f64 {
    schedule.lr_at(epoch)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3);
        let mut p = vec![1.0, -2.0, 0.5];
        s.step(&mut p, &[0.0; 3], 1e-3).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = AdamState::new(3);
        let mut p = vec![0.0; 3];
        s.step(&mut p, &[2.5, -0.01, 40.0], 1e-3).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-9);
        assert!((p[1] - 1e-3).abs() < 1e-6);
        assert!((p[2] + 1e-3).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut s = AdamState::new(2);
        let mut p = vec![0.0; 2];
        let err = s.step(&mut p, &[0.0, f64::NAN], 1e-3).unwrap_err();
        assert!(matches!(err, Error::Numeric { .. }));
        assert_eq!(s.t, 0);
    }

    #[test]
    fn staircase_values() {
        let s = LrSchedule::staircase(1e-3, 0.92, 1000);
        assert_eq!(s.lr_at(0), 1e-3);
        assert_eq!(s.lr_at(999), 1e-3);
        assert!((s.lr_at(1000) - 9.2e-4).abs() < 1e-18);
        let c = LrSchedule::constant(3e-4);
        assert_eq!(c.lr_at(123_456), 3e-4);
    }

    #[test]
    fn schedule_validation() {
        assert!(LrSchedule::staircase(1e-3, 1.5, 1000).validate().is_err());
        assert!(LrSchedule::staircase(0.0, 0.9, 1000).validate().is_err());
        assert!(LrSchedule::staircase(1e-3, 0.9, 0).validate().is_err());
        assert!(LrSchedule::staircase(1e-3, 0.9, 10).validate().is_ok());
    }

    /// Independent transcription of the update for comparison.
    fn scripted_adam(theta0: &[f64], grad: impl Fn(&[f64]) -> Vec<f64>, lr: f64, steps: usize) -> Vec<f64> {
        let n = theta0.len();
        let mut theta = theta0.to_vec();
        let mut m = vec![0.0; n];
        let mut v = vec![0.0; n];
        for t in 1..=steps {
            let g = grad(&theta);
            for i in 0..n {
                m[i] = 0.9 * m[i] + 0.1 * g[i];
                v[i] = 0.999 * v[i] + (1.0 - 0.999) * g[i] * g[i];
                let mh = m[i] / (1.0 - 0.9f64.powi(t as i32));
                let vh = v[i] / (1.0 - 0.999f64.powi(t as i32));
                theta[i] -= lr * mh / (vh.sqrt() + 1e-8);
            }
        }
        theta
    }

    fn quadratic_grad(diag: &[f64]) -> impl Fn(&[f64]) -> Vec<f64> + '_ {
        move |x: &[f64]| x.iter().zip(diag).map(|(xi, d)| d * xi).collect()
    }

    #[test]
    fn matches_scripted_transcription() {
        let diag = [1.0, 3.0, 0.2, 7.5];
        let theta0 = [1.0, -0.5, 2.0, 0.3];
        let grad = quadratic_grad(&diag);
        let reference = scripted_adam(&theta0, &grad, 1e-2, 1000);
        let mut s = AdamState::new(4);
        let mut theta = theta0.to_vec();
        for _ in 0..1000 {
            let g = grad(&theta);
            s.step(&mut theta, &g, 1e-2).unwrap();
        }
        for (a, b) in theta.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn converges_on_spd_quadratic() {
        // Positive-definite quadratic in 10 variables: f = ½ Σ d_i x_i².
        let diag: Vec<f64> = (1..=10).map(|i| i as f64 * 0.5).collect();
        let f = |x: &[f64]| 0.5 * x.iter().zip(&diag).map(|(xi, d)| d * xi * xi).sum::<f64>();
        let mut x: Vec<f64> = (0..10).map(|i| 1.0 - 0.15 * i as f64).collect();
        let f0 = f(&x);
        let mut s = AdamState::new(10);
        for _ in 0..5000 {
            let g: Vec<f64> = x.iter().zip(&diag).map(|(xi, d)| d * xi).collect();
            s.step(&mut x, &g, 1e-2).unwrap();
        }
        assert!(f(&x) < 1e-6 * f0, "{} vs {}", f(&x), f0);
    }

    #[test]
    fn deterministic_bits() {
        let mut a = AdamState::new(2);
        let mut b = AdamState::new(2);
        let mut pa = vec![0.3, 0.1];
        let mut pb = pa.clone();
        for k in 0..10 {
            let g = [0.1 * k as f64, -0.2];
            a.step(&mut pa, &g, 1e-3).unwrap();
            b.step(&mut pb, &g, 1e-3).unwrap();
        }
        assert_eq!(pa[0].to_bits(), pb[0].to_bits());
        assert_eq!(a, b);
    }
}
