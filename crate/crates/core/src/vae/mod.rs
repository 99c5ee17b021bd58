//! Multi-level VAEs for the compressed-dark and normal-light domains, their
//! patch discriminators, the perceptual surrogate and the Stage-1 losses.

mod disc;
mod losses;
mod model;
mod perceptual;

pub use disc::{Discriminator, LEAKY_SLOPE};
pub use losses::{kl_per_level, kl_value, lsgan_d_loss, lsgan_g_loss, vae_loss, LossWeights, VaeLoss};
pub use model::{LatentLevel, LatentPyramid, Sampling, Vae, VaeShape};
pub use perceptual::{PerceptualNet, PERCEPTUAL_SEED};
