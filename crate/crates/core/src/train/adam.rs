use mlsm_autodiff::Element;

use crate::error::{Error, Result};
use crate::nn::{NamedTensor, ParamStore};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Bias-corrected Adam. Moments are kept in 64-bit whatever the parameter type.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<T: Element>(params: &ParamStore<T>) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
        Adam { step: 0, m: zeros.clone(), v: zeros }
    }

    /// One update with learning rate `lr`. Parameters without a gradient are
    /// treated as having a zero one. A non-finite gradient aborts before
    /// anything is modified.
    pub fn update<T: Element>(&mut self, params: &ParamStore<T>, lr: f64) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Mismatch(format!(
                "optimizer holds {} buffers for {} parameters",
                self.m.len(),
                params.len()
            )));
        }
        let next = self.step + 1;
        for (name, t) in params.iter() {
            if let Some(g) = t.grad_ref().as_ref() {
                if let Some(j) = g.iter().position(|v| !v.is_finite()) {
                    return Err(Error::Numerical(format!("non-finite gradient at step {} in '{}'[{}]", next, name, j)));
                }
            }
        }
        self.step = next;
        let c1 = 1.0 - BETA1.powi(next as i32);
        let c2 = 1.0 - BETA2.powi(next as i32);
        for (((_, t), m), v) in params.iter().zip(&mut self.m).zip(&mut self.v) {
            let grad = t.grad_ref();
            let mut data = t.data_mut();
            for j in 0..data.len() {
                let g = grad.as_ref().map_or(0.0, |g| g[j].as_f64());
                m[j] = BETA1 * m[j] + (1.0 - BETA1) * g;
                v[j] = BETA2 * v[j] + (1.0 - BETA2) * g * g;
                let update = lr * (m[j] / c1) / ((v[j] / c2).sqrt() + ADAM_EPS);
                data[j] = T::lit(data[j].as_f64() - update);
            }
        }
        Ok(())
    }

    /// Moment buffers as `adam/m/<name>` and `adam/v/<name>` records.
    pub fn export<T: Element>(&self, params: &ParamStore<T>) -> Vec<NamedTensor> {
        let mut out = Vec::with_capacity(2 * self.m.len());
        for (tag, bufs) in [("m", &self.m), ("v", &self.v)] {
            for ((name, t), b) in params.iter().zip(bufs) {
                out.push(NamedTensor {
                    name: format!("adam/{}/{}", tag, name),
                    dims: t.dims().to_vec(),
                    data: b.iter().map(|&x| x as f32).collect(),
                });
            }
        }
        out
    }

    pub fn import<T: Element>(params: &ParamStore<T>, records: &[NamedTensor], step: u64) -> Result<Self> {
        let mut adam = Adam::new(params);
        adam.step = step;
        for (tag, bufs) in [("m", &mut adam.m), ("v", &mut adam.v)] {
            for ((name, t), b) in params.iter().zip(bufs.iter_mut()) {
                let full = format!("adam/{}/{}", tag, name);
                let rec = records
                    .iter()
                    .find(|r| r.name == full)
                    .ok_or_else(|| Error::Mismatch(format!("checkpoint lacks optimizer state '{}'", full)))?;
                if rec.dims != t.dims() {
                    return Err(Error::Mismatch(format!("optimizer state '{}' has dims {:?}", full, rec.dims)));
                }
                *b = rec.data.iter().map(|&x| x as f64).collect();
            }
        }
        Ok(adam)
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm<T: Element>(params: &ParamStore<T>, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for (_, t) in params.iter() {
        if let Some(g) = t.grad_ref().as_ref() {
            sq += g.iter().map(|v| v.as_f64() * v.as_f64()).sum::<f64>();
        }
    }
    let norm = sq.sqrt();
    if norm > max_norm {
        let f = T::lit(max_norm / norm);
        for (_, t) in params.iter() {
            if let Some(g) = t.grad_mut().as_mut() {
                g.iter_mut().for_each(|v| *v = *v * f);
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use mlsm_autodiff::ops;
    use mlsm_autodiff::Tensor;

    fn store(values: &[f64]) -> ParamStore<f64> {
        let mut ps = ParamStore::new();
        ps.register("w", Tensor::from_vec(&[values.len()], values.to_vec()).unwrap());
        ps
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let ps = store(&[1.0, -2.0]);
        let mut adam = Adam::new(&ps);
        ps.get("w").unwrap().grad_mut().replace(vec![0.0, 0.0]);
        adam.update(&ps, 0.1).unwrap();
        assert_eq!(ps.get("w").unwrap().to_vec(), vec![1.0, -2.0]);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn first_unit_step_moves_by_lr() {
        let ps = store(&[0.5; 3]);
        let mut adam = Adam::new(&ps);
        ps.get("w").unwrap().grad_mut().replace(vec![1.0; 3]);
        adam.update(&ps, 1e-3).unwrap();
        for v in ps.get("w").unwrap().to_vec() {
            assert!((0.5 - v - 1e-3).abs() < 1e-10);
        }
    }

    #[test]
    fn nan_gradient_names_step_and_parameter() {
        let ps = store(&[1.0, 2.0]);
        let mut adam = Adam::new(&ps);
        ps.get("w").unwrap().grad_mut().replace(vec![0.0, f64::NAN]);
        match adam.update(&ps, 0.1) {
            Err(Error::Numerical(m)) => assert!(m.contains("step 1") && m.contains("'w'[1]"), "{}", m),
            other => panic!("{:?}", other),
        }
        assert_eq!(adam.step, 0);
        assert_eq!(ps.get("w").unwrap().to_vec(), vec![1.0, 2.0]);
    }

    /// Textbook scalar Adam, written independently of the vectorised one.
    fn scalar_adam(mut x: f64, grad: impl Fn(f64) -> f64, lr: f64, steps: usize) -> f64 {
        let (mut m, mut v) = (0.0, 0.0);
        for t in 1..=steps {
            let g = grad(x);
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let m_hat = m / (1.0 - 0.9f64.powi(t as i32));
            let v_hat = v / (1.0 - 0.999f64.powi(t as i32));
            x -= lr * m_hat / (v_hat.sqrt() + 1e-8);
        }
        x
    }

    #[test]
    fn quadratic_bowl_matches_scalar_reference() {
        let start = [3.0, -1.5, 0.25, 7.0];
        let curv = Tensor::<f64>::from_vec(&[4], vec![1.0, 0.5, 4.0, 0.1]).unwrap();
        let ps = store(&start);
        let mut adam = Adam::new(&ps);
        for _ in 0..100 {
            ps.zero_grad();
            let w = ps.get("w").unwrap();
            // ½ Σ cᵢ wᵢ²
            ops::scale(&ops::sum(&ops::mul(&curv, &ops::square(w)).unwrap()), 0.5).backward().unwrap();
            adam.update(&ps, 0.05).unwrap();
        }
        let got = ps.get("w").unwrap().to_vec();
        for (i, &x0) in start.iter().enumerate() {
            let c = curv.to_vec()[i];
            let want = scalar_adam(x0, |x| c * x, 0.05, 100);
            assert!((got[i] - want).abs() < 1e-6, "{}: {} vs {}", i, got[i], want);
        }
    }

    #[test]
    fn clipping_caps_global_norm() {
        let ps = store(&[0.0, 0.0]);
        ps.get("w").unwrap().grad_mut().replace(vec![30.0, 40.0]);
        assert_eq!(clip_grad_norm(&ps, 5.0), 50.0);
        assert_eq!(ps.get("w").unwrap().grad().unwrap(), vec![3.0, 4.0]);
        assert_eq!(clip_grad_norm(&ps, 5.0), 5.0);
        assert_eq!(ps.get("w").unwrap().grad().unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn state_export_round_trip() {
        let ps = store(&[1.0, 2.0]);
        let mut adam = Adam::new(&ps);
        ps.get("w").unwrap().grad_mut().replace(vec![0.5, -0.25]);
        adam.update(&ps, 0.1).unwrap();
        let back = Adam::import(&ps, &adam.export(&ps), adam.step).unwrap();
        assert_eq!(back.export(&ps), adam.export(&ps));
        assert_eq!(back.step, 1);
    }
}
