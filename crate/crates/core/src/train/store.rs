//! Seed derivation and model checkpoint files.

use std::fmt;
use std::path::{Path, PathBuf};

use mlsm_autodiff::Element;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::checkpoint::{Checkpoint, VERSION_CHECKSUMMED, VERSION_PLAIN};
use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::mapping::MappingNet;
use crate::nn::ParamStore;
use crate::vae::Vae;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Dark,
    Normal,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Dark => "dark",
            Domain::Normal => "normal",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub enum SeedTag {
    Vae(Domain),
    Disc(Domain),
    Mapping,
    MappingDisc,
}

/// Independent per-model seed drawn from `seed` on a tag-specific stream.
pub fn derive_seed(seed: u64, tag: SeedTag) -> u64 {
    let stream = match tag {
        SeedTag::Vae(Domain::Dark) => 0,
        SeedTag::Vae(Domain::Normal) => 1,
        SeedTag::Disc(Domain::Dark) => 2,
        SeedTag::Disc(Domain::Normal) => 3,
        SeedTag::Mapping => 4,
        SeedTag::MappingDisc => 5,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// `vae-dark` → `<dir>/vae_dark.ckpt`.
pub fn checkpoint_path(dir: &Path, stage: &str) -> PathBuf {
    dir.join(format!("{}.ckpt", stage.replace('-', "_")))
}

pub fn save_model<T: Element>(
    dir: &Path,
    cfg: &TrainConfig,
    stage: &str,
    params: &ParamStore<T>,
    opt: &Adam,
) -> Result<()> {
    let mut records = params.export("");
    records.extend(opt.export(params));
    let ckpt = Checkpoint {
        version: if cfg.checksum { VERSION_CHECKSUMMED } else { VERSION_PLAIN },
        stage: stage.to_string(),
        step: opt.step,
        config: cfg.to_text(),
        records,
    };
    ckpt.save(checkpoint_path(dir, stage))
}

/// Loads a checkpoint, checks its stage tag, and parses its config echo.
pub fn open_checkpoint(dir: &Path, stage: &str) -> Result<(Checkpoint, TrainConfig)> {
    let path = checkpoint_path(dir, stage);
    if !path.exists() {
        return Err(Error::Usage(format!("missing checkpoint {}", path.display())));
    }
    let ckpt = Checkpoint::load(&path)?;
    if ckpt.stage != stage {
        return Err(Error::Usage(format!("{} holds '{}', expected '{}'", path.display(), ckpt.stage, stage)));
    }
    let cfg = TrainConfig::parse(&ckpt.config, &format!("{} config block", path.display()))?;
    Ok((ckpt, cfg))
}

/// Both Stage-1 VAEs from `dir`, checked against the shape `cfg` expects.
pub fn load_vaes(dir: &Path, cfg: &TrainConfig) -> Result<(Vae<f32>, Vae<f32>)> {
    let load = |domain: Domain| -> Result<Vae<f32>> {
        let stage = format!("vae-{}", domain);
        let (ckpt, saved) = open_checkpoint(dir, &stage)?;
        if saved.k != cfg.k || saved.base_channels != cfg.base_channels {
            return Err(Error::Usage(format!(
                "{} was trained with k={} base_channels={}, config asks for k={} base_channels={}",
                stage, saved.k, saved.base_channels, cfg.k, cfg.base_channels
            )));
        }
        let vae = Vae::new(cfg.vae_shape()?, 0);
        vae.params.import("", &ckpt.records).map_err(|e| Error::Usage(format!("{}: {}", stage, e)))?;
        Ok(vae)
    };
    Ok((load(Domain::Dark)?, load(Domain::Normal)?))
}

/// Everything inference needs: both VAEs from `vae_dir`, the mapping
/// network from `mapping_dir`, and the mapping run's config.
pub struct TrainedModels {
    pub config: TrainConfig,
    pub dark: Vae<f32>,
    pub normal: Vae<f32>,
    pub mapping: MappingNet<f32>,
}

impl TrainedModels {
    pub fn load(vae_dir: &Path, mapping_dir: &Path) -> Result<Self> {
        let (ckpt, config) = open_checkpoint(mapping_dir, "mapping")?;
        let (dark, normal) = load_vaes(vae_dir, &config)?;
        let mapping = MappingNet::new(config.mapping_shape()?, 0)?;
        mapping.params.import("", &ckpt.records).map_err(|e| Error::Usage(format!("mapping: {}", e)))?;
        Ok(TrainedModels { config, dark, normal, mapping })
    }
}
