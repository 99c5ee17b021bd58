use mlsm_autodiff::{Element, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{Act, Conv, ConvBlock, ConvSpec, ParamStore};

pub const LEAKY_SLOPE: f64 = 0.2;

/// Patch discriminator: four `k4 s2 p1` convs with leaky ReLU (instance
/// norm on all but the first) and a `3×3` head producing a score map.
pub struct Discriminator<T: Element> {
    pub params: ParamStore<T>,
    body: Vec<ConvBlock<T>>,
    head: Conv<T>,
}

impl<T: Element> Discriminator<T> {
    pub fn new(base: usize, seed: u64) -> Self {
        let mut ps = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = [3, base, base * 2, base * 4, base * 4];
        let body = (0..4)
            .map(|i| {
                let spec = ConvSpec::same(widths[i], widths[i + 1], 4).stride(2).padding(1);
                ConvBlock::new(&mut ps, &mut rng, &format!("layer{}", i), spec, i > 0, Act::Leaky(LEAKY_SLOPE))
            })
            .collect();
        let head = Conv::new(&mut ps, &mut rng, "head", ConvSpec::same(widths[4], 1, 3).gain(1.0));
        Discriminator { params: ps, body, head }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = x.clone();
        for b in &self.body {
            h = b.forward(&h)?;
        }
        self.head.forward(&h)
    }

    /// Output of the head is `bias` everywhere: all weights zeroed.
    #[cfg(test)]
    pub(crate) fn constant(base: usize, value: f64) -> Self {
        let d = Self::new(base, 0);
        for (_, t) in d.params.iter() {
            t.data_mut().iter_mut().for_each(|v| *v = T::zero());
        }
        d.head.bias.as_ref().unwrap().data_mut()[0] = T::lit(value);
        d
    }
}
