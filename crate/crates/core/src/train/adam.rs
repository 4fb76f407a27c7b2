use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::nets::WeightStore;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 2e-4, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if !ok {
            return arg_err("AdamConfig", format!("{self:?}"));
        }
        Ok(())
    }
}

/// Moment buffers per parameter name, bias-corrected updates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub t: u64,
    m: IndexMap<String, Vec<T>>,
    v: IndexMap<String, Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0, m: IndexMap::new(), v: IndexMap::new() }
    }

    pub fn first_moment(&self, name: &str) -> Option<&[T]> {
        self.m.get(name).map(Vec::as_slice)
    }

    pub fn second_moment(&self, name: &str) -> Option<&[T]> {
        self.v.get(name).map(Vec::as_slice)
    }

    /// One update of every tensor in `params`. `grads` must hold a
    /// same-shaped gradient for each of them; nothing is modified otherwise.
    pub fn step(&mut self, params: &mut WeightStore<T>, grads: &WeightStore<T>) -> Result<()> {
        for (name, p) in params.iter() {
            let g = grads.get(name).map_err(|_| Error::MissingGradient(name.to_string()))?;
            if g.dims() != p.dims() {
                return Err(Error::Shape {
                    op: "adam",
                    detail: format!("gradient of `{name}` has dims {:?}, parameter {:?}", g.dims(), p.dims()),
                });
            }
        }
        self.t += 1;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one_b1, one_b2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let corr1 = T::lit(1.0 - c.beta1.powi(self.t as i32));
        let corr2 = T::lit(1.0 - c.beta2.powi(self.t as i32));
        let (lr, eps) = (T::lit(c.lr), T::lit(c.epsilon));
        for (name, p) in params.iter_mut() {
            let g = grads.get(name)?;
            let n = p.len();
            let m = self.m.entry(name.to_string()).or_insert_with(|| vec![T::zero(); n]);
            let v = self.v.entry(name.to_string()).or_insert_with(|| vec![T::zero(); n]);
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + one_b1 * gi;
                *vi = b2 * *vi + one_b2 * gi * gi;
                let m_hat = *mi / corr1;
                let v_hat = *vi / corr2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndauto::Tensor;

    fn single(name: &str, v: f64) -> WeightStore<f64> {
        let mut s = WeightStore::new();
        s.insert(name, Tensor::scalar(v)).unwrap();
        s
    }

    #[test]
    fn first_step_hand_value() {
        let mut p = single("w", 1.0);
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut p, &single("w", 0.5)).unwrap();
        let want = 1.0 - 2e-4 * 0.5 / (0.5 + 1e-8);
        assert!((p.get("w").unwrap().data()[0] - want).abs() < 1e-15);
        assert!((p.get("w").unwrap().data()[0] - 0.9998).abs() < 1e-10);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = single("w", 0.25);
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut p, &single("w", 0.0)).unwrap();
        assert_eq!(p.get("w").unwrap().data()[0], 0.25);
        assert_eq!(adam.t, 1);
    }

    #[test]
    fn missing_gradient_names_parameter() {
        let mut p = single("gen.head.bias", 0.0);
        let mut adam = AdamState::new(AdamConfig::default());
        let err = adam.step(&mut p, &single("other", 0.0)).unwrap_err();
        assert_eq!(err.to_string(), "missing gradient for parameter `gen.head.bias`");
        assert_eq!(adam.t, 0);
    }

    #[test]
    fn two_steps_follow_recurrence() {
        // m1 = 0.1g, v1 = 0.001g², m2 = 0.19g, v2 = 0.001999g²
        let g = 0.3;
        let mut p = single("w", 2.0);
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut p, &single("w", g)).unwrap();
        adam.step(&mut p, &single("w", g)).unwrap();
        let lr = 2e-4;
        let s1 = (0.1 * g / 0.1) / ((0.001 * g * g / 0.001f64).sqrt() + 1e-8);
        let s2 = (0.19 * g / 0.19) / ((0.001999 * g * g / (1.0 - 0.999f64.powi(2))).sqrt() + 1e-8);
        let want = 2.0 - lr * s1 - lr * s2;
        assert!((p.get("w").unwrap().data()[0] - want).abs() < 1e-10);
    }

    #[test]
    fn matches_scripted_trace() {
        // tools/adam_oracle.py 2.0 0.3 2 and -1.5 -0.02 3
        for (w0, g, trace) in [
            (2.0, 0.3, vec![1.9998000000066667, 1.9996000000133334]),
            (-1.5, -0.02, vec![-1.4998000001, -1.4996000002, -1.4994000003]),
        ] {
            let mut p = single("w", w0);
            let mut adam = AdamState::new(AdamConfig::default());
            for want in trace {
                adam.step(&mut p, &single("w", g)).unwrap();
                assert!((p.get("w").unwrap().data()[0] - want).abs() < 1e-10);
            }
        }
    }
}
