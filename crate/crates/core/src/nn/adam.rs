use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam optimizer state: first and second moments per parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<P: Parameters + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let mut m = Vec::new();
        params.visit(&mut |_, _, d| m.push(vec![0.0; d.len()]));
        let v = m.clone();
        Self { config, step: 0, m, v }
    }

    /// Applies one update. Fails without touching `params` if any gradient
    /// entry is non-finite, naming the offending tensor.
    pub fn update<P: Parameters + ?Sized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let mut chunks = Vec::with_capacity(self.m.len());
        let mut bad: Option<String> = None;
        grads.visit(&mut |name, _, d| {
            if bad.is_none() && d.iter().any(|v| !v.is_finite()) {
                bad = Some(name.to_string());
            }
            chunks.push(d.to_vec());
        });
        if let Some(name) = bad {
            return Err(Error::NonFinite(format!("gradient {name}")));
        }
        if chunks.len() != self.m.len() {
            return Err(Error::shape("optimizer tensors", self.m.len(), chunks.len()));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut k = 0;
        params.visit_mut(&mut |_, _, p| {
            let (mk, vk, gk) = (&mut m[k], &mut v[k], &chunks[k]);
            for j in 0..p.len() {
                let g = gk[j];
                mk[j] = beta1 * mk[j] + (1.0 - beta1) * g;
                vk[j] = beta2 * vk[j] + (1.0 - beta2) * g * g;
                let m_hat = mk[j] / bc1;
                let v_hat = vk[j] / bc2;
                p[j] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
            k += 1;
        });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Dense};

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut d = Dense::zeros(2, 1, Activation::Identity);
        let mut g = d.clone();
        g.weights = vec![0.5, -3.0];
        g.bias = vec![0.0];
        let mut opt = Adam::new(AdamConfig::default(), &d);
        opt.update(&mut d, &g).unwrap();
        assert!((d.weights[0] + 1e-3).abs() < 1e-9);
        assert!((d.weights[1] - 1e-3).abs() < 1e-9);
        assert_eq!(d.bias[0], 0.0);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut d = Dense::zeros(2, 1, Activation::Identity);
        let mut g = d.clone();
        g.bias[0] = f64::NAN;
        let mut opt = Adam::new(AdamConfig::default(), &d);
        let err = opt.update(&mut d, &g).unwrap_err();
        assert!(err.to_string().contains("bias"), "{err}");
        assert_eq!(opt.step, 0);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut d = Dense::zeros(1, 1, Activation::Identity);
        d.bias[0] = 3.0;
        let mut opt = Adam::new(
            AdamConfig {
                learning_rate: 0.05,
                ..Default::default()
            },
            &d,
        );
        for _ in 0..2000 {
            let mut g = d.zeros_like();
            g.bias[0] = 2.0 * (d.bias[0] - 1.0);
            opt.update(&mut d, &g).unwrap();
        }
        assert!((d.bias[0] - 1.0).abs() < 1e-3);
    }
}
