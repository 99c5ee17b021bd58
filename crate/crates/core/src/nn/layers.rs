use mlsm_autodiff::ops::{conv2d, conv_transpose2d, instance_norm, leaky_relu, relu, INSTANCE_NORM_EPS};
use mlsm_autodiff::{Element, Tensor};
use rand_chacha::ChaCha8Rng;

use super::params::ParamStore;
use crate::error::Result;

/// Weights drawn from `U(−b, b)` with `b = gain/√fan_in`; biases start at zero.
fn init_weight<T: Element>(dims: &[usize], fan_in: usize, gain: f64, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let b = gain / (fan_in as f64).sqrt();
    Tensor::uniform(dims, -b, b, rng)
}

/// Default gain, suited to layers feeding a ReLU.
pub const RELU_GAIN: f64 = 2.449_489_742_783_178; // √6

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Act {
    Identity,
    Relu,
    Leaky(f64),
}

impl Act {
    pub fn apply<T: Element>(self, x: Tensor<T>) -> Tensor<T> {
        match self {
            Act::Identity => x,
            Act::Relu => relu(&x),
            Act::Leaky(s) => leaky_relu(&x, s),
        }
    }
}

pub struct Conv<T: Element> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

/// Geometry of a square convolution.
#[derive(Debug, Clone, Copy)]
pub struct ConvSpec {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    pub bias: bool,
    pub gain: f64,
}

impl ConvSpec {
    /// `k×k`, stride 1, "same" padding, with bias.
    pub fn same(cin: usize, cout: usize, k: usize) -> Self {
        ConvSpec { cin, cout, k, stride: 1, padding: k / 2, dilation: 1, bias: true, gain: RELU_GAIN }
    }

    pub fn stride(mut self, s: usize) -> Self {
        self.stride = s;
        self
    }

    pub fn padding(mut self, p: usize) -> Self {
        self.padding = p;
        self
    }

    pub fn dilation(mut self, d: usize) -> Self {
        self.dilation = d;
        self.padding = d * (self.k / 2);
        self
    }

    pub fn no_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn gain(mut self, g: f64) -> Self {
        self.gain = g;
        self
    }
}

impl<T: Element> Conv<T> {
    pub fn new(ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, name: &str, s: ConvSpec) -> Self {
        let fan_in = s.cin * s.k * s.k;
        let weight =
            ps.register(format!("{}.weight", name), init_weight(&[s.cout, s.cin, s.k, s.k], fan_in, s.gain, rng));
        let bias = s.bias.then(|| ps.register(format!("{}.bias", name), Tensor::zeros(&[s.cout])));
        Conv { weight, bias, stride: s.stride, padding: s.padding, dilation: s.dilation }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(conv2d(x, &self.weight, self.bias.as_ref(), self.stride, self.padding, self.dilation)?)
    }
}

/// Transposed convolution `k4 s2 p1`, doubling spatial extent.
pub struct Deconv<T: Element> {
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

impl<T: Element> Deconv<T> {
    pub fn new(ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize, bias: bool) -> Self {
        // each output pixel receives k²/stride² = 4 taps per input channel
        let weight = ps.register(format!("{}.weight", name), init_weight(&[cin, cout, 4, 4], cin * 4, RELU_GAIN, rng));
        let bias = bias.then(|| ps.register(format!("{}.bias", name), Tensor::zeros(&[cout])));
        Deconv { weight, bias }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(conv_transpose2d(x, &self.weight, self.bias.as_ref(), 2, 1)?)
    }
}

pub struct InstanceNorm<T: Element> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Element> InstanceNorm<T> {
    pub fn new(ps: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        InstanceNorm {
            gamma: ps.register(format!("{}.gamma", name), Tensor::ones(&[channels])),
            beta: ps.register(format!("{}.beta", name), Tensor::zeros(&[channels])),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(instance_norm(x, &self.gamma, &self.beta, INSTANCE_NORM_EPS)?)
    }
}

/// Convolution, optional instance norm, activation. The conv bias is
/// dropped when a norm follows, since the norm would cancel it.
pub struct ConvBlock<T: Element> {
    pub conv: Conv<T>,
    pub norm: Option<InstanceNorm<T>>,
    pub act: Act,
}

impl<T: Element> ConvBlock<T> {
    pub fn new(ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, name: &str, spec: ConvSpec, norm: bool, act: Act) -> Self {
        let spec = if norm { spec.no_bias() } else { spec };
        let conv = Conv::new(ps, rng, &format!("{}.conv", name), spec);
        let norm = norm.then(|| InstanceNorm::new(ps, &format!("{}.norm", name), spec.cout));
        ConvBlock { conv, norm, act }
    }

    /// `3×3` conv + instance norm + ReLU.
    pub fn cnr(ps: &mut ParamStore<T>, rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize) -> Self {
        Self::new(ps, rng, name, ConvSpec::same(cin, cout, 3), true, Act::Relu)
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = self.conv.forward(x)?;
        if let Some(n) = &self.norm {
            y = n.forward(&y)?;
        }
        Ok(self.act.apply(y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn norm_drops_conv_bias() {
        let mut ps = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = ConvBlock::cnr(&mut ps, &mut rng, "b", 3, 4);
        assert!(b.conv.bias.is_none());
        let names: Vec<&str> = ps.iter().map(|(n, _)| n).collect();
        assert_eq!(names, ["b.conv.weight", "b.norm.gamma", "b.norm.beta"]);
    }

    #[test]
    fn dilated_spec_keeps_extent() {
        let mut ps = ParamStore::<f64>::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = Conv::new(&mut ps, &mut rng, "c", ConvSpec::same(2, 2, 3).dilation(6));
        let x = Tensor::<f64>::zeros(&[1, 2, 5, 7]);
        assert_eq!(c.forward(&x).unwrap().dims(), &[1, 2, 5, 7]);
    }
}
