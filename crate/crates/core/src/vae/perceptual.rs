use mlsm_autodiff::ops::{add, l1_loss};
use mlsm_autodiff::{Element, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{Act, ConvBlock, ConvSpec, ParamStore};

pub const PERCEPTUAL_SEED: u64 = 0x5EED_F00D;

/// Frozen, seeded random-feature pyramid standing in for a pretrained
/// feature extractor. Three stages at full, half and quarter resolution.
pub struct PerceptualNet<T: Element> {
    pub seed: u64,
    params: ParamStore<T>,
    stages: Vec<ConvBlock<T>>,
}

impl<T: Element> PerceptualNet<T> {
    pub fn new(seed: u64) -> Self {
        let mut ps = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let specs = [ConvSpec::same(3, 8, 3), ConvSpec::same(8, 16, 3).stride(2), ConvSpec::same(16, 32, 3).stride(2)];
        let stages = specs
            .iter()
            .enumerate()
            .map(|(i, &s)| ConvBlock::new(&mut ps, &mut rng, &format!("stage{}", i), s, false, Act::Relu))
            .collect();
        ps.set_trainable(false);
        PerceptualNet { seed, params: ps, stages }
    }

    pub fn features(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let mut out = Vec::with_capacity(self.stages.len());
        let mut h = x.clone();
        for s in &self.stages {
            h = s.forward(&h)?;
            out.push(h.clone());
        }
        Ok(out)
    }

    /// Sum over stages of the mean absolute feature difference.
    pub fn loss(&self, a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
        let (fa, fb) = (self.features(a)?, self.features(b)?);
        let mut total = l1_loss(&fa[0], &fb[0])?;
        for (x, y) in fa.iter().zip(&fb).skip(1) {
            total = add(&total, &l1_loss(x, y)?)?;
        }
        Ok(total)
    }

    pub fn param_count(&self) -> usize {
        self.params.numel()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_and_seeded() {
        let p = PerceptualNet::<f32>::new(3);
        assert!(p.params.iter().all(|(_, t)| !t.is_tracked()));
        let q = PerceptualNet::<f32>::new(3);
        assert_eq!(p.params.digest(), q.params.digest());
    }
}
