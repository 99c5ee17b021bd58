use mlsm_autodiff::ops::{
    add, channel_mean, concat_channels, crop2d, instance_norm, mul_broadcast, relu, sigmoid, spatial_mean,
    INSTANCE_NORM_EPS,
};
use mlsm_autodiff::{Element, Tensor};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::nn::{Act, Conv, ConvBlock, ConvSpec, Deconv, InstanceNorm, ParamStore};

pub const ASPP_DILATIONS: [usize; 4] = [1, 6, 12, 18];

/// `x + IN(conv(ReLU(IN(conv(x)))))`.
pub struct ResBlock<T: Element> {
    a: ConvBlock<T>,
    b: ConvBlock<T>,
}

impl<T: Element> ResBlock<T> {
    pub fn new(ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, name: &str, c: usize) -> Self {
        ResBlock {
            a: ConvBlock::cnr(ps, rng, &format!("{}.a", name), c, c),
            b: ConvBlock::new(ps, rng, &format!("{}.b", name), ConvSpec::same(c, c, 3), true, Act::Identity),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(add(x, &self.b.forward(&self.a.forward(x)?)?)?)
    }
}

/// Channel gate followed by a spatial gate.
pub struct Attention<T: Element> {
    squeeze: Conv<T>,
    excite: Conv<T>,
    spatial: Conv<T>,
}

impl<T: Element> Attention<T> {
    pub fn new(ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, name: &str, c: usize) -> Self {
        let mid = (c / 4).max(1);
        Attention {
            squeeze: Conv::new(ps, rng, &format!("{}.squeeze", name), ConvSpec::same(c, mid, 1)),
            excite: Conv::new(ps, rng, &format!("{}.excite", name), ConvSpec::same(mid, c, 1).gain(1.0)),
            spatial: Conv::new(ps, rng, &format!("{}.spatial", name), ConvSpec::same(1, 1, 3).gain(1.0)),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let pooled = spatial_mean(x)?;
        let gate = sigmoid(&self.excite.forward(&relu(&self.squeeze.forward(&pooled)?))?);
        let x = mul_broadcast(x, &gate)?;
        let map = sigmoid(&self.spatial.forward(&channel_mean(&x)?)?);
        Ok(mul_broadcast(&x, &map)?)
    }
}

/// Parallel dilated `3×3` convs, concatenated and fused by a `1×1` conv.
pub struct Aspp<T: Element> {
    branches: Vec<Conv<T>>,
    fuse: Conv<T>,
}

impl<T: Element> Aspp<T> {
    pub fn new(ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, name: &str, c: usize) -> Self {
        let branches = ASPP_DILATIONS
            .iter()
            .map(|&d| Conv::new(ps, rng, &format!("{}.rate{}", name, d), ConvSpec::same(c, c, 3).dilation(d)))
            .collect();
        let n = ASPP_DILATIONS.len();
        let fuse = Conv::new(ps, rng, &format!("{}.fuse", name), ConvSpec::same(n * c, c, 1).gain(1.0));
        Aspp { branches, fuse }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let parts = self.branches.iter().map(|b| Ok(relu(&b.forward(x)?))).collect::<Result<Vec<_>>>()?;
        self.fuse.forward(&concat_channels(&parts)?)
    }
}

/// ResBlock ×2 → (attention) → ASPP → ResBlock.
pub struct Enlighten<T: Element> {
    pre: [ResBlock<T>; 2],
    attention: Option<Attention<T>>,
    aspp: Aspp<T>,
    post: ResBlock<T>,
}

impl<T: Element> Enlighten<T> {
    pub fn new(ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, name: &str, c: usize, attention: bool) -> Self {
        Enlighten {
            pre: [
                ResBlock::new(ps, rng, &format!("{}.res0", name), c),
                ResBlock::new(ps, rng, &format!("{}.res1", name), c),
            ],
            attention: attention.then(|| Attention::new(ps, rng, &format!("{}.attn", name), c)),
            aspp: Aspp::new(ps, rng, &format!("{}.aspp", name), c),
            post: ResBlock::new(ps, rng, &format!("{}.res2", name), c),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = self.pre[1].forward(&self.pre[0].forward(x)?)?;
        if let Some(a) = &self.attention {
            h = a.forward(&h)?;
        }
        self.post.forward(&self.aspp.forward(&h)?)
    }
}

/// Small UNet: two stride-2 convs down, two `×2` deconvs up, additive skips.
/// Deconv outputs are cropped to the skip's extent so odd sizes work.
pub struct UNet<T: Element> {
    down: [ConvBlock<T>; 2],
    up: [(Deconv<T>, InstanceNorm<T>); 2],
    out: Conv<T>,
}

impl<T: Element> UNet<T> {
    pub fn new(ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, name: &str, c: usize) -> Self {
        let down = |ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, i: usize| {
            let spec = ConvSpec::same(c, c, 3).stride(2);
            ConvBlock::new(ps, rng, &format!("{}.down{}", name, i), spec, true, Act::Relu)
        };
        let up = |ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, i: usize| {
            let d = Deconv::new(ps, rng, &format!("{}.up{}.deconv", name, i), c, c, false);
            (d, InstanceNorm::new(ps, &format!("{}.up{}.norm", name, i), c))
        };
        UNet {
            down: [down(ps, rng, 0), down(ps, rng, 1)],
            up: [up(ps, rng, 0), up(ps, rng, 1)],
            out: Conv::new(ps, rng, &format!("{}.out", name), ConvSpec::same(c, c, 3).gain(1.0)),
        }
    }

    fn up_to(&self, i: usize, x: &Tensor<T>, skip: &Tensor<T>) -> Result<Tensor<T>> {
        let (deconv, norm) = &self.up[i];
        let y = deconv.forward(x)?;
        let y = relu(&instance_norm(&y, &norm.gamma, &norm.beta, INSTANCE_NORM_EPS)?);
        let (_, _, h, w) = skip.nchw();
        Ok(add(&crop2d(&y, 0, 0, h, w)?, skip)?)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let d1 = self.down[0].forward(x)?;
        let d2 = self.down[1].forward(&d1)?;
        let u1 = self.up_to(0, &d2, &d1)?;
        let u2 = self.up_to(1, &u1, x)?;
        self.out.forward(&u2)
    }
}
