use mlsm_autodiff::ops::{add, bilinear_upsample, clamp01, exp, mul, scale};
use mlsm_autodiff::{Element, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{dim_error, Act, Conv, ConvBlock, ConvSpec, ParamStore};

/// Level count and per-level channel widths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VaeShape {
    pub channels: Vec<usize>,
}

impl VaeShape {
    pub fn new(channels: Vec<usize>) -> Result<Self> {
        if channels.is_empty() || channels.contains(&0) {
            return Err(Error::Usage(format!("invalid channel widths {:?}", channels)));
        }
        Ok(VaeShape { channels })
    }

    /// `k` levels with widths `base·2^i`.
    pub fn doubling(k: usize, base: usize) -> Result<Self> {
        Self::new((0..k).map(|i| base << i).collect())
    }

    pub fn k(&self) -> usize {
        self.channels.len()
    }

    /// Spatial extents must be multiples of this.
    pub fn divisor(&self) -> usize {
        1 << (self.k() - 1)
    }
}

/// How the encoder turns each level's Gaussian into the latent passed on.
pub enum Sampling<'r> {
    /// Use the mean (inference and Stage-2).
    Mean,
    /// Reparameterized draw with noise from the given stream.
    Draw(&'r mut ChaCha8Rng),
}

pub struct LatentLevel<T: Element> {
    pub mean: Tensor<T>,
    pub log_var: Tensor<T>,
    pub sample: Tensor<T>,
    /// Standard-normal noise used for `sample`, absent in mean mode.
    pub eps: Option<Tensor<T>>,
}

pub struct LatentPyramid<T: Element> {
    pub levels: Vec<LatentLevel<T>>,
}

impl<T: Element> LatentPyramid<T> {
    pub fn samples(&self) -> Vec<Tensor<T>> {
        self.levels.iter().map(|l| l.sample.clone()).collect()
    }

    pub fn means(&self) -> Vec<Tensor<T>> {
        self.levels.iter().map(|l| l.mean.clone()).collect()
    }
}

struct EncoderLevel<T: Element> {
    /// Stem at level 0, stride-2 downsample above.
    entry: ConvBlock<T>,
    /// Applied residually.
    block: ConvBlock<T>,
    mean: Conv<T>,
    log_var: Conv<T>,
}

struct DecoderLevel<T: Element> {
    /// Applied residually.
    body: ConvBlock<T>,
    out: Conv<T>,
}

impl<T: Element> DecoderLevel<T> {
    fn forward(&self, y: &Tensor<T>) -> Result<Tensor<T>> {
        self.out.forward(&add(y, &self.body.forward(y)?)?)
    }
}

/// Multi-level VAE: pyramid encoder with Gaussian latent heads and an
/// additive-skip decoder. Each level's conv + instance norm + ReLU block sits
/// on a residual path, since a bare instance norm would erase the image's
/// overall brightness and contrast.
pub struct Vae<T: Element> {
    pub shape: VaeShape,
    pub params: ParamStore<T>,
    enc: Vec<EncoderLevel<T>>,
    dec: Vec<DecoderLevel<T>>,
}

impl<T: Element> Vae<T> {
    pub fn new(shape: VaeShape, seed: u64) -> Self {
        let mut ps = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &shape.channels;
        let head = |cin: usize| ConvSpec::same(cin, cin, 1).gain(1.0);
        let mut enc = Vec::with_capacity(c.len());
        for i in 0..c.len() {
            // entry conv without normalization so absolute intensity survives;
            // the residual blocks after it keep an identity path around their norms
            let entry = if i == 0 {
                ConvBlock::new(&mut ps, &mut rng, "enc0.stem", ConvSpec::same(3, c[0], 3), false, Act::Relu)
            } else {
                let spec = ConvSpec::same(c[i - 1], c[i], 3).stride(2);
                ConvBlock::new(&mut ps, &mut rng, &format!("enc{}.down", i), spec, false, Act::Relu)
            };
            let block = ConvBlock::cnr(&mut ps, &mut rng, &format!("enc{}.block", i), c[i], c[i]);
            let mean = Conv::new(&mut ps, &mut rng, &format!("enc{}.mean", i), head(c[i]));
            let log_var = Conv::new(&mut ps, &mut rng, &format!("enc{}.log_var", i), head(c[i]));
            enc.push(EncoderLevel { entry, block, mean, log_var });
        }
        let mut dec = Vec::with_capacity(c.len());
        for i in 0..c.len() {
            let body = ConvBlock::cnr(&mut ps, &mut rng, &format!("dec{}.body", i), c[i], c[i]);
            let cout = if i == 0 { 3 } else { c[i - 1] };
            let out = Conv::new(&mut ps, &mut rng, &format!("dec{}.out", i), ConvSpec::same(c[i], cout, 3).gain(1.0));
            dec.push(DecoderLevel { body, out });
        }
        Vae { shape, params: ps, enc, dec }
    }

    pub fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.dims().len() != 4 || x.dims()[1] != 3 {
            return Err(dim_error("vae.encode", format!("expected N×3×H×W, got {:?}", x.dims())));
        }
        let d = self.shape.divisor();
        let (_, _, h, w) = x.nchw();
        if h % d != 0 || w % d != 0 || h == 0 || w == 0 {
            return Err(Error::Usage(format!("input extent {}x{} is not a multiple of {}", w, h, d)));
        }
        Ok(())
    }

    /// `l⁰ = E⁰(x)`, `lⁱ = Eⁱ(lⁱ⁻¹↓)`, each level emitting a Gaussian.
    pub fn encode(&self, x: &Tensor<T>, mut sampling: Sampling<'_>) -> Result<LatentPyramid<T>> {
        self.check_input(x)?;
        let mut levels: Vec<LatentLevel<T>> = Vec::with_capacity(self.enc.len());
        for (i, e) in self.enc.iter().enumerate() {
            let h = e.entry.forward(if i == 0 { x } else { &levels[i - 1].sample })?;
            let h = add(&h, &e.block.forward(&h)?)?;
            let mean = e.mean.forward(&h)?;
            let log_var = e.log_var.forward(&h)?;
            let (sample, eps) = match &mut sampling {
                Sampling::Mean => (mean.clone(), None),
                Sampling::Draw(rng) => {
                    let eps = Tensor::randn(mean.dims(), &mut **rng);
                    let std = exp(&scale(&log_var, 0.5));
                    (add(&mean, &mul(&std, &eps)?)?, Some(eps))
                }
            };
            levels.push(LatentLevel { mean, log_var, sample, eps });
        }
        Ok(LatentPyramid { levels })
    }

    /// `y^{k−2} = D^{k−1}(l^{k−1})↑ + l^{k−2}`, …, output `D⁰(y⁰)`; unclamped.
    pub fn decode(&self, latents: &[Tensor<T>]) -> Result<Tensor<T>> {
        let k = self.shape.k();
        if latents.len() != k {
            return Err(dim_error("vae.decode", format!("expected {} latent levels, got {}", k, latents.len())));
        }
        let (n, _, h0, w0) = latents[0].nchw();
        for (i, l) in latents.iter().enumerate() {
            let want = [n, self.shape.channels[i], h0 >> i, w0 >> i];
            if l.dims() != want || (h0 >> i) << i != h0 || (w0 >> i) << i != w0 {
                return Err(dim_error("vae.decode", format!("level {} is {:?}, expected {:?}", i, l.dims(), want)));
            }
        }
        let mut y = latents[k - 1].clone();
        for i in (1..k).rev() {
            let d = self.dec[i].forward(&y)?;
            y = add(&bilinear_upsample(&d, 2)?, &latents[i - 1])?;
        }
        self.dec[0].forward(&y)
    }

    /// Encodes in mean mode and decodes, clamping for emission.
    pub fn reconstruct(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let p = self.encode(x, Sampling::Mean)?;
        Ok(clamp01(&self.decode(&p.means())?))
    }
}
