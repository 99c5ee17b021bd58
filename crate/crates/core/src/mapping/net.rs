use mlsm_autodiff::ops::{add, bilinear_upsample, sub};
use mlsm_autodiff::{Element, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::blocks::{Enlighten, ResBlock, UNet};
use crate::error::{Error, Result};
use crate::nn::{dim_error, Conv, ConvSpec, ParamStore};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingShape {
    /// Latent channel widths per level (shared with the VAEs).
    pub channels: Vec<usize>,
    /// Levels that get a mapping network; the rest pass through unchanged.
    pub active: Vec<usize>,
    pub attention: bool,
}

impl MappingShape {
    /// The top `count` levels active, i.e. `{k−1}`, `{k−1, k−2}`, ….
    pub fn top_levels(channels: Vec<usize>, count: usize, attention: bool) -> Result<Self> {
        let k = channels.len();
        if count == 0 || count > k {
            return Err(Error::Usage(format!("active level count {} outside 1..={}", count, k)));
        }
        Ok(MappingShape { active: (k - count..k).collect(), channels, attention })
    }

    pub fn k(&self) -> usize {
        self.channels.len()
    }
}

pub struct LevelMap<T: Element> {
    enlighten: Enlighten<T>,
    /// Aligns the top level's width with this level's; absent at the top.
    project: Option<Conv<T>>,
    deblock: UNet<T>,
    fusion: ResBlock<T>,
}

/// Per-level two-branch latent mapping networks.
pub struct MappingNet<T: Element> {
    pub shape: MappingShape,
    pub params: ParamStore<T>,
    levels: Vec<Option<LevelMap<T>>>,
}

impl<T: Element> MappingNet<T> {
    pub fn new(shape: MappingShape, seed: u64) -> Result<Self> {
        let k = shape.k();
        if let Some(&bad) = shape.active.iter().find(|&&i| i >= k) {
            return Err(Error::Usage(format!("active level {} does not exist (k = {})", bad, k)));
        }
        let mut ps = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let top = shape.channels[k - 1];
        let levels = (0..k)
            .map(|i| {
                if !shape.active.contains(&i) {
                    return None;
                }
                let c = shape.channels[i];
                let name = |part: &str| format!("level{}.{}", i, part);
                Some(LevelMap {
                    enlighten: Enlighten::new(&mut ps, &mut rng, &name("enlighten"), c, shape.attention),
                    project: (i + 1 < k)
                        .then(|| Conv::new(&mut ps, &mut rng, &name("project"), ConvSpec::same(top, c, 1).gain(1.0))),
                    deblock: UNet::new(&mut ps, &mut rng, &name("deblock"), c),
                    fusion: ResBlock::new(&mut ps, &mut rng, &name("fusion"), c),
                })
            })
            .collect();
        Ok(MappingNet { shape, params: ps, levels })
    }

    /// Keeps only the top `n` levels mapped; lower levels pass through.
    /// Fails when one of those levels was never trained.
    pub fn restrict_to_top(&mut self, n: usize) -> Result<()> {
        let k = self.shape.k();
        if n == 0 || n > k {
            return Err(Error::Usage(format!("--levels must be in 1..={}, got {}", k, n)));
        }
        if let Some(i) = (k - n..k).find(|&i| !self.is_active(i)) {
            return Err(Error::Usage(format!("level {} was not trained in this mapping checkpoint", i)));
        }
        for i in 0..k - n {
            self.levels[i] = None;
        }
        self.shape.active = (k - n..k).collect();
        Ok(())
    }

    pub fn is_active(&self, level: usize) -> bool {
        self.levels.get(level).is_some_and(|l| l.is_some())
    }

    fn level(&self, i: usize) -> Result<&LevelMap<T>> {
        self.levels
            .get(i)
            .and_then(|l| l.as_ref())
            .ok_or_else(|| Error::Usage(format!("level {} has no mapping network", i)))
    }

    /// `F_en = f(lᵢ)`.
    pub fn enlighten_branch(&self, i: usize, l_i: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_level(i, l_i)?;
        self.level(i)?.enlighten.forward(l_i)
    }

    /// `F_de = g(lᵢ − upsample(l_top))`, with a `1×1` width projection below the top.
    pub fn deblocking_branch(&self, i: usize, l_i: &Tensor<T>, l_top: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_level(i, l_i)?;
        self.check_level(self.shape.k() - 1, l_top)?;
        let lm = self.level(i)?;
        let top = match &lm.project {
            Some(p) => p.forward(l_top)?,
            None => l_top.clone(),
        };
        let up = bilinear_upsample(&top, 1 << (self.shape.k() - 1 - i))?;
        if up.dims() != l_i.dims() {
            return Err(dim_error(
                "deblocking_branch",
                format!("top level upsamples to {:?}, level {} is {:?}", up.dims(), i, l_i.dims()),
            ));
        }
        lm.deblock.forward(&sub(l_i, &up)?)
    }

    /// `ResBlock(F_en + F_de)` on active levels, identity elsewhere.
    pub fn map_level(&self, i: usize, l_i: &Tensor<T>, l_top: &Tensor<T>) -> Result<Tensor<T>> {
        if !self.is_active(i) {
            self.check_level(i, l_i)?;
            return Ok(l_i.clone());
        }
        let fused = add(&self.enlighten_branch(i, l_i)?, &self.deblocking_branch(i, l_i, l_top)?)?;
        self.level(i)?.fusion.forward(&fused)
    }

    /// Maps a whole pyramid (one tensor per level).
    pub fn map(&self, latents: &[Tensor<T>]) -> Result<Vec<Tensor<T>>> {
        let k = self.shape.k();
        if latents.len() != k {
            return Err(dim_error("mapping", format!("expected {} levels, got {}", k, latents.len())));
        }
        let top = &latents[k - 1];
        (0..k).map(|i| self.map_level(i, &latents[i], top)).collect()
    }

    fn check_level(&self, i: usize, t: &Tensor<T>) -> Result<()> {
        let c = *self.shape.channels.get(i).ok_or_else(|| Error::Usage(format!("level {} out of range", i)))?;
        if t.dims().len() != 4 || t.dims()[1] != c {
            return Err(dim_error("mapping", format!("level {} expects {} channels, got {:?}", i, c, t.dims())));
        }
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn fusion(&self, i: usize) -> &ResBlock<T> {
        &self.levels[i].as_ref().unwrap().fusion
    }
}
