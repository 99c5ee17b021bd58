//! VAE stage: both domain VAEs trained with alternating discriminator updates.

use std::fs;
use std::path::Path;

use mlsm_autodiff::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{clip_grad_norm, Adam};
use super::config::{lr_at, TrainConfig};
use super::log::LossLog;
use super::store::{derive_seed, save_model, Domain, SeedTag};
use crate::data::{BatchStream, PairedSample};
use crate::error::{Error, Result};
use crate::image::{stack, Image};
use crate::vae::{lsgan_d_loss, vae_loss, Discriminator, PerceptualNet, Sampling, Vae};

pub struct DomainModels {
    pub vae: Vae<f32>,
    pub disc: Discriminator<f32>,
    pub vae_opt: Adam,
    pub disc_opt: Adam,
}

impl DomainModels {
    pub fn new(cfg: &TrainConfig, domain: Domain) -> Result<Self> {
        let vae = Vae::new(cfg.vae_shape()?, derive_seed(cfg.seed_init, SeedTag::Vae(domain)));
        let disc = Discriminator::new(cfg.base_channels, derive_seed(cfg.seed_init, SeedTag::Disc(domain)));
        let (vae_opt, disc_opt) = (Adam::new(&vae.params), Adam::new(&disc.params));
        Ok(DomainModels { vae, disc, vae_opt, disc_opt })
    }
}

pub struct Stage1 {
    pub dark: DomainModels,
    pub normal: DomainModels,
    pub dark_log: LossLog,
    pub normal_log: LossLog,
    /// Mean-mode reconstruction L1 over the training images, `[dark, normal]`.
    pub initial_l1: [f64; 2],
    pub final_l1: [f64; 2],
    /// Smallest logged (weighted) KL term across both logs.
    pub min_kl: f64,
    pub steps: usize,
}

/// Mean-mode reconstruction L1 in unit-interval space, evaluated in chunks.
pub fn reconstruction_l1(vae: &Vae<f32>, images: &[&Image]) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in images.chunks(8) {
        let x: Tensor<f32> = stack(chunk)?;
        let y = vae.reconstruct(&x)?;
        total += x.data().iter().zip(y.data().iter()).map(|(a, b)| (a - b).abs() as f64).sum::<f64>();
        count += x.numel();
    }
    Ok(total / count.max(1) as f64)
}

fn domain_images(samples: &[PairedSample], domain: Domain) -> Vec<&Image> {
    samples
        .iter()
        .map(|s| match domain {
            Domain::Dark => &s.compressed_dark,
            Domain::Normal => &s.normal,
        })
        .collect()
}

/// One generator update followed by one discriminator update. Returns the
/// log row (without step).
fn step(
    m: &mut DomainModels,
    x: &Tensor<f32>,
    noise: &mut ChaCha8Rng,
    perceptual: &PerceptualNet<f32>,
    cfg: &TrainConfig,
    lr: f64,
    step: usize,
) -> Result<Vec<f64>> {
    // D stays frozen through the generator backward pass
    m.disc.params.set_trainable(false);
    m.vae.params.zero_grad();
    let pyr = m.vae.encode(x, Sampling::Draw(noise))?;
    let recon = m.vae.decode(&pyr.samples())?;
    let loss = vae_loss(x, &recon, &pyr, &m.disc, perceptual, &cfg.weights)?;
    let total = loss.total.item() as f64;
    if !total.is_finite() || loss.kl.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite VAE loss at step {}", step)));
    }
    loss.total.backward()?;
    clip_grad_norm(&m.vae.params, cfg.clip_norm);
    m.vae_opt.update(&m.vae.params, lr)?;

    m.disc.params.set_trainable(true);
    m.disc.params.zero_grad();
    let d = lsgan_d_loss(&m.disc, x, &recon)?;
    if !d.item().is_finite() {
        return Err(Error::Numerical(format!("non-finite discriminator loss at step {}", step)));
    }
    d.backward()?;
    clip_grad_norm(&m.disc.params, cfg.clip_norm);
    m.disc_opt.update(&m.disc.params, lr)?;

    let mut row = vec![lr, total, loss.l1, loss.perceptual, loss.gan];
    row.extend(&loss.kl);
    Ok(row)
}

fn save_domain(dir: &Path, cfg: &TrainConfig, domain: Domain, m: &DomainModels) -> Result<()> {
    save_model(dir, cfg, &format!("vae-{}", domain), &m.vae.params, &m.vae_opt)?;
    save_model(dir, cfg, &format!("disc-{}", domain), &m.disc.params, &m.disc_opt)
}

/// Trains the compressed-dark VAE on the dark images and the normal-light
/// VAE on the normal images of `samples`. When `out` is given, checkpoints
/// and CSV logs are written there.
pub fn train_stage1(cfg: &TrainConfig, samples: &[PairedSample], out: Option<&Path>) -> Result<Stage1> {
    cfg.validate()?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let stream = BatchStream::new(samples, cfg.crop, cfg.batch, cfg.seed_data)?;
    let per_epoch = stream.batches_per_epoch();
    let horizon = if cfg.horizon == 0 { cfg.epochs_vae * per_epoch } else { cfg.horizon };
    let perceptual = PerceptualNet::<f32>::new(cfg.perceptual_seed);
    let mut dark = DomainModels::new(cfg, Domain::Dark)?;
    let mut normal = DomainModels::new(cfg, Domain::Normal)?;
    let (dark_imgs, normal_imgs) = (domain_images(samples, Domain::Dark), domain_images(samples, Domain::Normal));
    let initial_l1 = [reconstruction_l1(&dark.vae, &dark_imgs)?, reconstruction_l1(&normal.vae, &normal_imgs)?];

    let mut noise = [ChaCha8Rng::seed_from_u64(cfg.seed_noise), ChaCha8Rng::seed_from_u64(cfg.seed_noise)];
    noise[1].set_stream(1);
    let mut dark_log = LossLog::stage1(cfg.k);
    let mut normal_log = LossLog::stage1(cfg.k);
    let mut t = 0usize;
    for epoch in 0..cfg.epochs_vae {
        for batch in stream.epoch(epoch as u64) {
            let lr = lr_at(t, cfg.lr, horizon);
            dark_log.push(t, step(&mut dark, &batch.dark, &mut noise[0], &perceptual, cfg, lr, t)?);
            normal_log.push(t, step(&mut normal, &batch.normal, &mut noise[1], &perceptual, cfg, lr, t)?);
            t += 1;
        }
        if let Some(dir) = out {
            if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
                save_domain(dir, cfg, Domain::Dark, &dark)?;
                save_domain(dir, cfg, Domain::Normal, &normal)?;
            }
        }
    }
    let final_l1 = [reconstruction_l1(&dark.vae, &dark_imgs)?, reconstruction_l1(&normal.vae, &normal_imgs)?];
    if let Some(dir) = out {
        save_domain(dir, cfg, Domain::Dark, &dark)?;
        save_domain(dir, cfg, Domain::Normal, &normal)?;
        dark_log.save(dir.join("stage1_dark.csv"))?;
        normal_log.save(dir.join("stage1_normal.csv"))?;
    }
    let kl_cols: Vec<String> = (0..cfg.k).map(|i| format!("kl{}", i)).collect();
    let min_kl = [&dark_log, &normal_log]
        .iter()
        .flat_map(|log| kl_cols.iter().flat_map(|c| log.column(c).unwrap_or_default()))
        .fold(f64::INFINITY, f64::min);
    Ok(Stage1 { dark, normal, dark_log, normal_log, initial_l1, final_l1, min_kl, steps: t })
}
