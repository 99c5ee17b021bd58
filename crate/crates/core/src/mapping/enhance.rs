use mlsm_autodiff::ops::{add, clamp01, l1_loss, scale};
use mlsm_autodiff::{Element, Tensor};

use super::net::MappingNet;
use crate::error::Result;
use crate::image::Image;
use crate::nn::dim_error;
use crate::vae::{lsgan_g_loss, Discriminator, LossWeights, PerceptualNet, Sampling, Vae};

/// Dark encoder (mean mode) → mapping → normal decoder, clamped to `[0, 1]`.
pub fn enhance_tensor<T: Element>(
    x: &Tensor<T>,
    dark: &Vae<T>,
    normal: &Vae<T>,
    mapping: &MappingNet<T>,
) -> Result<Tensor<T>> {
    let latents = dark.encode(x, Sampling::Mean)?.means();
    Ok(clamp01(&normal.decode(&mapping.map(&latents)?)?))
}

/// Enhances an image of any extent: reflect-padded up to the encoder's
/// divisor, then cropped back.
pub fn enhance_image(img: &Image, dark: &Vae<f32>, normal: &Vae<f32>, mapping: &MappingNet<f32>) -> Result<Image> {
    let padded = img.pad_reflect_to_multiple(dark.shape.divisor());
    let y = enhance_tensor(&padded.to_tensor::<f32>(), dark, normal, mapping)?;
    Image::from_tensor(&y)?.crop(0, 0, img.width(), img.height())
}

pub struct MappingLoss<T: Element> {
    pub total: Tensor<T>,
    /// Unweighted `L1(l̃ᵢ, lᵢ)` per level.
    pub latent: Vec<f64>,
    /// Weighted perceptual and generator terms.
    pub perceptual: f64,
    pub gan: f64,
}

/// `Σᵢ L1(l̃ᵢ, lᵢ) + w_p·perceptual(ñ, n) + w_g·LSGAN_G(ñ)`.
pub fn mapping_loss<T: Element>(
    pred: &[Tensor<T>],
    target: &[Tensor<T>],
    enhanced: &Tensor<T>,
    normal: &Tensor<T>,
    disc: &Discriminator<T>,
    perceptual: &PerceptualNet<T>,
    w: &LossWeights,
) -> Result<MappingLoss<T>> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(dim_error("mapping_loss", format!("{} predicted vs {} target levels", pred.len(), target.len())));
    }
    let mut latent = Vec::with_capacity(pred.len());
    let mut total: Option<Tensor<T>> = None;
    for (p, t) in pred.iter().zip(target) {
        let l = l1_loss(p, t)?;
        latent.push(l.item().as_f64());
        total = Some(match total {
            Some(acc) => add(&acc, &l)?,
            None => l,
        });
    }
    let mut out = MappingLoss { total: total.expect("at least one level"), latent, perceptual: 0.0, gan: 0.0 };
    if w.perceptual != 0.0 {
        let p = scale(&perceptual.loss(enhanced, normal)?, w.perceptual);
        out.perceptual = p.item().as_f64();
        out.total = add(&out.total, &p)?;
    }
    if w.gan != 0.0 {
        let g = scale(&lsgan_g_loss(disc, enhanced)?, w.gan);
        out.gan = g.item().as_f64();
        out.total = add(&out.total, &g)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mapping::MappingShape;
    use crate::vae::VaeShape;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_prediction_gives_zero_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let l: Vec<Tensor<f64>> = (0..3).map(|_| Tensor::uniform(&[1, 2, 4, 4], -1.0, 1.0, &mut rng)).collect();
        let n = Tensor::<f64>::uniform(&[1, 3, 32, 32], 0.0, 1.0, &mut rng);
        let d = Discriminator::<f64>::constant(4, 1.0);
        let loss = mapping_loss(&l, &l, &n, &n, &d, &PerceptualNet::new(0), &LossWeights::default()).unwrap();
        assert_eq!(loss.total.item(), 0.0);
    }

    #[test]
    fn enhancement_is_deterministic_and_keeps_extent() {
        let shape = VaeShape::doubling(3, 2).unwrap();
        let dark = Vae::<f32>::new(shape.clone(), 1);
        let normal = Vae::<f32>::new(shape.clone(), 2);
        let map = MappingNet::new(MappingShape::top_levels(shape.channels, 3, false).unwrap(), 3).unwrap();
        let img = crate::data::synth_scene(4, 32, 16).unwrap().crop(0, 0, 21, 13).unwrap();
        let a = enhance_image(&img, &dark, &normal, &map).unwrap();
        let b = enhance_image(&img, &dark, &normal, &map).unwrap();
        assert_eq!(a.dims(), (21, 13));
        assert_eq!(a, b);
    }
}
