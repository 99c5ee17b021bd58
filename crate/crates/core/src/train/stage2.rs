//! Mapping stage: per-level mapping networks between frozen VAEs.

use std::fs;
use std::path::Path;

use super::adam::{clip_grad_norm, Adam};
use super::config::{lr_at, TrainConfig};
use super::log::LossLog;
use super::store::{derive_seed, save_model, SeedTag};
use crate::data::{BatchStream, PairedSample};
use crate::error::{Error, Result};
use crate::mapping::{mapping_loss, MappingNet};
use crate::vae::{lsgan_d_loss, Discriminator, PerceptualNet, Sampling, Vae};

pub struct Stage2 {
    pub mapping: MappingNet<f32>,
    pub disc: Discriminator<f32>,
    pub log: LossLog,
    /// Parameter digests of `[dark, normal]` VAEs before and after the run.
    pub vae_digest_before: [String; 2],
    pub vae_digest_after: [String; 2],
    pub steps: usize,
}

fn save_all(dir: &Path, cfg: &TrainConfig, s: (&MappingNet<f32>, &Adam, &Discriminator<f32>, &Adam)) -> Result<()> {
    save_model(dir, cfg, "mapping", &s.0.params, s.1)?;
    save_model(dir, cfg, "disc-mapping", &s.2.params, s.3)
}

/// Trains the mapping networks of `cfg.active_levels`. Both VAEs are frozen
/// for the whole run and their digests are checked at the end.
pub fn train_stage2(
    cfg: &TrainConfig,
    samples: &[PairedSample],
    dark: &Vae<f32>,
    normal: &Vae<f32>,
    out: Option<&Path>,
) -> Result<Stage2> {
    cfg.validate()?;
    for (name, vae) in [("dark", dark), ("normal", normal)] {
        if vae.shape != cfg.vae_shape()? {
            return Err(Error::Usage(format!(
                "{} VAE has channels {:?}, config expects {:?}",
                name,
                vae.shape.channels,
                cfg.vae_shape()?.channels
            )));
        }
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let stream = BatchStream::new(samples, cfg.crop, cfg.batch, cfg.seed_data)?;
    let horizon = if cfg.horizon == 0 { cfg.epochs_mapping * stream.batches_per_epoch() } else { cfg.horizon };
    let perceptual = PerceptualNet::<f32>::new(cfg.perceptual_seed);
    let mapping = MappingNet::<f32>::new(cfg.mapping_shape()?, derive_seed(cfg.seed_init, SeedTag::Mapping))?;
    let disc = Discriminator::<f32>::new(cfg.base_channels, derive_seed(cfg.seed_init, SeedTag::MappingDisc));
    let (mut map_opt, mut disc_opt) = (Adam::new(&mapping.params), Adam::new(&disc.params));

    dark.params.set_trainable(false);
    normal.params.set_trainable(false);
    let before = [dark.params.digest(), normal.params.digest()];
    let mut log = LossLog::stage2(cfg.k);
    let mut t = 0usize;
    for epoch in 0..cfg.epochs_mapping {
        for batch in stream.epoch(epoch as u64) {
            let lr = lr_at(t, cfg.lr, horizon);
            disc.params.set_trainable(false);
            mapping.params.zero_grad();
            let source = dark.encode(&batch.dark, Sampling::Mean)?.means();
            let target = normal.encode(&batch.normal, Sampling::Mean)?.means();
            let mapped = mapping.map(&source)?;
            let enhanced = normal.decode(&mapped)?;
            let loss = mapping_loss(&mapped, &target, &enhanced, &batch.normal, &disc, &perceptual, &cfg.weights)?;
            let total = loss.total.item() as f64;
            if !total.is_finite() {
                return Err(Error::Numerical(format!("non-finite mapping loss at step {}", t)));
            }
            loss.total.backward()?;
            clip_grad_norm(&mapping.params, cfg.clip_norm);
            map_opt.update(&mapping.params, lr)?;

            disc.params.set_trainable(true);
            disc.params.zero_grad();
            let d = lsgan_d_loss(&disc, &batch.normal, &enhanced)?;
            if !d.item().is_finite() {
                return Err(Error::Numerical(format!("non-finite discriminator loss at step {}", t)));
            }
            d.backward()?;
            clip_grad_norm(&disc.params, cfg.clip_norm);
            disc_opt.update(&disc.params, lr)?;

            let mut row = vec![lr, total];
            row.extend(&loss.latent);
            row.extend([loss.perceptual, loss.gan]);
            log.push(t, row);
            t += 1;
        }
        if let Some(dir) = out {
            if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
                save_all(dir, cfg, (&mapping, &map_opt, &disc, &disc_opt))?;
            }
        }
    }
    let after = [dark.params.digest(), normal.params.digest()];
    assert_eq!(before, after, "frozen VAE parameters changed during the mapping stage");
    if let Some(dir) = out {
        save_all(dir, cfg, (&mapping, &map_opt, &disc, &disc_opt))?;
        log.save(dir.join("stage2.csv"))?;
    }
    Ok(Stage2 { mapping, disc, log, vae_digest_before: before, vae_digest_after: after, steps: t })
}
