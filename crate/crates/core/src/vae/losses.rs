use mlsm_autodiff::ops::{add, add_scalar, exp, l1_loss, mean, scale, square, sub};
use mlsm_autodiff::{Element, Tensor};

use super::disc::Discriminator;
use super::model::LatentPyramid;
use super::perceptual::PerceptualNet;
use crate::error::Result;
use crate::nn::dim_error;

/// `mean(−½(1 + log_var − mean² − exp(log_var)))`.
pub fn kl_per_level<T: Element>(mu: &Tensor<T>, log_var: &Tensor<T>) -> Result<Tensor<T>> {
    if mu.dims() != log_var.dims() {
        return Err(dim_error("kl_per_level", format!("{:?} vs {:?}", mu.dims(), log_var.dims())));
    }
    let inner = sub(&sub(&add_scalar(log_var, 1.0), &square(mu))?, &exp(log_var))?;
    Ok(scale(&mean(&inner), -0.5))
}

/// [`kl_per_level`] evaluated in 64-bit with `expm1`, so the value is never
/// pushed below zero by rounding.
pub fn kl_value<T: Element>(mu: &Tensor<T>, log_var: &Tensor<T>) -> f64 {
    let (mu, lv) = (mu.data(), log_var.data());
    let total: f64 = mu
        .iter()
        .zip(lv.iter())
        .map(|(&m, &v)| {
            let (m, v) = (m.as_f64(), v.as_f64());
            0.5 * (m * m + (v.exp_m1() - v))
        })
        .sum();
    total / mu.len().max(1) as f64
}

/// Least-squares discriminator loss; the fake branch is detached.
pub fn lsgan_d_loss<T: Element>(disc: &Discriminator<T>, real: &Tensor<T>, fake: &Tensor<T>) -> Result<Tensor<T>> {
    let real_term = mean(&square(&add_scalar(&disc.forward(real)?, -1.0)));
    let fake_term = mean(&square(&disc.forward(&fake.detach())?));
    Ok(scale(&add(&real_term, &fake_term)?, 0.5))
}

/// Least-squares generator loss `mean((D(fake) − 1)²)`.
pub fn lsgan_g_loss<T: Element>(disc: &Discriminator<T>, fake: &Tensor<T>) -> Result<Tensor<T>> {
    Ok(mean(&square(&add_scalar(&disc.forward(fake)?, -1.0))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub perceptual: f64,
    pub gan: f64,
    pub kl: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { perceptual: 0.1, gan: 0.01, kl: 0.01 }
    }
}

/// Scalar loss with its weighted components (they sum to `total` up to
/// rounding; KL terms come from [`kl_value`]).
pub struct VaeLoss<T: Element> {
    pub total: Tensor<T>,
    pub l1: f64,
    pub perceptual: f64,
    pub gan: f64,
    pub kl: Vec<f64>,
}

/// `L1 + w_p·perceptual + w_g·LSGAN_G + w_kl·Σ KLᵢ`. Zero-weighted terms are
/// not evaluated.
pub fn vae_loss<T: Element>(
    input: &Tensor<T>,
    recon: &Tensor<T>,
    latents: &LatentPyramid<T>,
    disc: &Discriminator<T>,
    perceptual: &PerceptualNet<T>,
    w: &LossWeights,
) -> Result<VaeLoss<T>> {
    let l1 = l1_loss(recon, input)?;
    let mut out = VaeLoss { l1: l1.item().as_f64(), total: l1, perceptual: 0.0, gan: 0.0, kl: Vec::new() };
    if w.perceptual != 0.0 {
        let p = scale(&perceptual.loss(recon, input)?, w.perceptual);
        out.perceptual = p.item().as_f64();
        out.total = add(&out.total, &p)?;
    }
    if w.gan != 0.0 {
        let g = scale(&lsgan_g_loss(disc, recon)?, w.gan);
        out.gan = g.item().as_f64();
        out.total = add(&out.total, &g)?;
    }
    for level in &latents.levels {
        if w.kl == 0.0 {
            out.kl.push(0.0);
            continue;
        }
        let kl = scale(&kl_per_level(&level.mean, &level.log_var)?, w.kl);
        out.kl.push(w.kl * kl_value(&level.mean, &level.log_var));
        out.total = add(&out.total, &kl)?;
    }
    Ok(out)
}
