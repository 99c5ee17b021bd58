use mlsm_autodiff::{Element, Tensor, TensorError};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Named tensor exported from or imported into a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

/// Ordered registry of a model's trainable tensors.
///
/// Registration order is the serialization and optimizer order.
pub struct ParamStore<T: Element> {
    entries: Vec<(String, Tensor<T>)>,
}

impl<T: Element> Default for ParamStore<T> {
    fn default() -> Self {
        ParamStore { entries: Vec::new() }
    }
}

impl<T: Element> ParamStore<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor<T>) -> Tensor<T> {
        let name = name.into();
        debug_assert!(self.get(&name).is_none(), "duplicate parameter {}", name);
        let t = value.requires_grad(true);
        self.entries.push((name, t.clone()));
        t
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> Vec<Tensor<T>> {
        self.entries.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn set_trainable(&self, flag: bool) {
        for (_, t) in &self.entries {
            t.set_requires_grad(flag);
        }
    }

    pub fn zero_grad(&self) {
        for (_, t) in &self.entries {
            t.zero_grad();
        }
    }

    /// Hex SHA-256 over names, shapes and `f32` little-endian values.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, t) in &self.entries {
            h.update((name.len() as u32).to_le_bytes());
            h.update(name.as_bytes());
            for &d in t.dims() {
                h.update((d as u32).to_le_bytes());
            }
            for v in t.data().iter() {
                h.update((v.as_f64() as f32).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{:02x}", b)).collect()
    }

    pub fn export(&self, prefix: &str) -> Vec<NamedTensor> {
        self.entries
            .iter()
            .map(|(n, t)| NamedTensor {
                name: format!("{}{}", prefix, n),
                dims: t.dims().to_vec(),
                data: t.data().iter().map(|v| v.as_f64() as f32).collect(),
            })
            .collect()
    }

    /// Overwrites every parameter from `records` (names looked up with `prefix`).
    /// Missing names or shape disagreements are mismatch errors.
    pub fn import(&self, prefix: &str, records: &[NamedTensor]) -> Result<()> {
        for (name, t) in &self.entries {
            let full = format!("{}{}", prefix, name);
            let rec = records
                .iter()
                .find(|r| r.name == full)
                .ok_or_else(|| Error::Mismatch(format!("checkpoint lacks parameter '{}'", full)))?;
            if rec.dims != t.dims() {
                return Err(Error::Mismatch(format!(
                    "parameter '{}' is {:?} in the checkpoint but {:?} in the model",
                    full,
                    rec.dims,
                    t.dims()
                )));
            }
            let mut data = t.data_mut();
            for (d, &v) in data.iter_mut().zip(&rec.data) {
                *d = T::lit(v as f64);
            }
        }
        Ok(())
    }

    /// Casts every parameter into a fresh store of another element type.
    pub fn cast<U: Element>(&self) -> ParamStore<U> {
        ParamStore {
            entries: self.entries.iter().map(|(n, t)| (n.clone(), t.cast::<U>().requires_grad(true))).collect(),
        }
    }
}

pub(crate) fn dim_error(op: &'static str, detail: impl Into<String>) -> Error {
    Error::Tensor(TensorError::dim(op, detail))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn export_import_round_trip() {
        let mut a = ParamStore::<f32>::new();
        a.register("w", Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let mut b = ParamStore::<f32>::new();
        b.register("w", Tensor::zeros(&[2, 2]));
        b.import("m/", &a.export("m/")).unwrap();
        assert_eq!(a.digest(), b.digest());
        assert!(b.import("x/", &a.export("m/")).is_err());
    }

    #[test]
    fn digest_tracks_values() {
        let mut a = ParamStore::<f32>::new();
        let w = a.register("w", Tensor::zeros(&[3]));
        let before = a.digest();
        w.data_mut()[1] = 1.0;
        assert_ne!(before, a.digest());
    }
}
